#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "falldet/threshold.hpp"

using namespace falldet;

namespace {

DerivedSignalSet with_peaks(double smv_acc, double fi, double avd = 1.0, double smv_gyr = 10.0) {
  DerivedSignalSet d;
  d.smv_acc = {0.0, smv_acc, 0.0};
  d.fi = {0.0, fi, 0.0};
  d.avd = {0.0, avd, 0.0};
  d.smv_gyr = {0.0, smv_gyr, 0.0};
  return d;
}

ThresholdConfig config(std::initializer_list<ThresholdEntry> e) { return ThresholdConfig{e}; }

// Scores every grid point with explicit loops and keeps the best under the
// documented ordering.
double calibrate_oracle(const std::vector<double> &falls, const std::vector<double> &adls, GridRange g) {
  double best_thr = 0, best_se = -1, best_sp = -1;
  for (std::size_t i = 0; i < g.count(); ++i) {
    double thr = g.at(i);
    int tp = 0, tn = 0;
    for (double p : falls) tp += p > thr;
    for (double p : adls) tn += !(p > thr);
    double se = double(tp) / double(falls.size()), sp = double(tn) / double(adls.size());
    bool better = se > best_se || (se == best_se && sp > best_sp) || (se == best_se && sp == best_sp && thr > best_thr);
    if (better) {
      best_thr = thr;
      best_se = se;
      best_sp = sp;
    }
  }
  return best_thr;
}

} // namespace

TEST(Detect, SingleSignalStrictComparison) {
  auto cfg = config({{DerivedSignal::SmvAcc, 2.5}});
  EXPECT_EQ(detect(with_peaks(2.6, 0), cfg).label, Label::Fall);
  EXPECT_EQ(detect(with_peaks(2.5, 0), cfg).label, Label::ADL);
  EXPECT_EQ(detect(with_peaks(1.1, 0), cfg).label, Label::ADL);
  auto v = detect(with_peaks(2.6, 0), cfg);
  ASSERT_EQ(v.votes.size(), 1u);
  EXPECT_DOUBLE_EQ(v.votes[0].peak, 2.6);
  EXPECT_EQ(v.score(), 1.0);
}

TEST(Detect, TieGoesToFall) {
  auto cfg = config({{DerivedSignal::SmvAcc, 2.5}, {DerivedSignal::FI, 3.0}});
  EXPECT_EQ(detect(with_peaks(2.6, 1.0), cfg).label, Label::Fall);
  EXPECT_EQ(detect(with_peaks(2.0, 3.5), cfg).label, Label::Fall);
  EXPECT_EQ(detect(with_peaks(2.0, 1.0), cfg).label, Label::ADL);
  EXPECT_DOUBLE_EQ(detect(with_peaks(2.6, 1.0), cfg).score(), 0.5);
}

TEST(Detect, MajorityOfThree) {
  auto cfg = config({{DerivedSignal::SmvAcc, 2.5}, {DerivedSignal::FI, 3.0}, {DerivedSignal::AVD, 2.0}});
  EXPECT_EQ(detect(with_peaks(2.6, 1.0, 1.0), cfg).label, Label::ADL);
  EXPECT_EQ(detect(with_peaks(2.6, 3.1, 1.0), cfg).label, Label::Fall);
}

TEST(Detect, EmptyConfigRejected) {
  try {
    detect(with_peaks(3, 3), ThresholdConfig{});
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::NoSignalsEnabled);
  }
  EXPECT_THROW(detect(with_peaks(3, 3), config({{DerivedSignal::FI, -1.0}})), Error);
}

TEST(Detect, MonotoneInPeakAndThreshold) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.5, 6.0);
  for (int i = 0; i < 500; ++i) {
    double p = u(rng), thr = u(rng), bump = u(rng) * 0.05;
    auto cfg = config({{DerivedSignal::SmvAcc, thr}});
    if (detect(with_peaks(p, 0), cfg).label == Label::Fall) {
      EXPECT_EQ(detect(with_peaks(p + bump, 0), cfg).label, Label::Fall);
      EXPECT_EQ(detect(with_peaks(p, 0), config({{DerivedSignal::SmvAcc, thr - bump}})).label, Label::Fall);
    }
    // Scaling peak and threshold together keeps the verdict.
    auto scaled = config({{DerivedSignal::SmvAcc, thr * 2.0}});
    EXPECT_EQ(detect(with_peaks(p, 0), cfg).label, detect(with_peaks(p * 2.0, 0), scaled).label);
  }
}

TEST(Calibrate, SeparableExample) {
  PeakTable t{{3.0, 4.2, 5.1}, {1.1, 1.7, 2.0}};
  GridRange g = default_grid(DerivedSignal::SmvAcc);
  auto p = calibrate_signal(t, g);
  EXPECT_EQ(p.sensitivity, 1.0);
  EXPECT_EQ(p.specificity, 1.0);
  EXPECT_GE(p.threshold, 2.0);
  EXPECT_LT(p.threshold, 3.0);
  EXPECT_EQ(p.threshold, calibrate_oracle(t.fall_peaks, t.adl_peaks, g));
}

TEST(Calibrate, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> fall(1.8, 6.5), adl(0.9, 3.5);
  GridRange g = default_grid(DerivedSignal::SmvAcc);
  for (int trial = 0; trial < 300; ++trial) {
    PeakTable t;
    for (std::size_t i = 1 + rng() % 30; i > 0; --i) t.fall_peaks.push_back(fall(rng));
    for (std::size_t i = 1 + rng() % 30; i > 0; --i) t.adl_peaks.push_back(adl(rng));
    EXPECT_EQ(calibrate_signal(t, g).threshold, calibrate_oracle(t.fall_peaks, t.adl_peaks, g));

    // Order of the development data is irrelevant.
    auto shuffled = t;
    std::shuffle(shuffled.fall_peaks.begin(), shuffled.fall_peaks.end(), rng);
    std::shuffle(shuffled.adl_peaks.begin(), shuffled.adl_peaks.end(), rng);
    EXPECT_EQ(calibrate_signal(shuffled, g).threshold, calibrate_signal(t, g).threshold);
  }
}

TEST(Calibrate, FullSensitivityWhenReachable) {
  PeakTable t{{2.0, 2.1}, {1.9, 3.0}};
  auto p = calibrate_signal(t, default_grid(DerivedSignal::SmvAcc));
  EXPECT_EQ(p.sensitivity, 1.0);
  EXPECT_DOUBLE_EQ(p.specificity, 0.5);
  EXPECT_LT(p.threshold, 2.0);
}

TEST(Calibrate, FallbackWhenGridCannotReachFullSensitivity) {
  // Lowest grid value 1.5 still misses the 1.2 fall.
  PeakTable t{{1.2, 3.0}, {1.0, 1.1}};
  auto p = calibrate_signal(t, default_grid(DerivedSignal::SmvAcc));
  EXPECT_DOUBLE_EQ(p.sensitivity, 0.5);
  EXPECT_EQ(p.specificity, 1.0);
  EXPECT_NEAR(p.threshold, 2.95, 1e-9);
}

TEST(Calibrate, SingleClassRejected) {
  PeakTable t{{3.0}, {}};
  try {
    calibrate_signal(t, default_grid(DerivedSignal::FI));
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::SingleClassDevSet);
  }
}

TEST(Calibrate, MultiSignalConfig) {
  std::vector<DerivedSignalSet> sets{with_peaks(3.5, 6.0), with_peaks(4.0, 7.0), with_peaks(1.2, 1.0),
                                     with_peaks(1.4, 2.0)};
  std::vector<CalibrationInput> dev{{Label::Fall, &sets[0]}, {Label::Fall, &sets[1]},
                                    {Label::ADL, &sets[2]}, {Label::ADL, &sets[3]}};
  std::vector<DerivedSignal> sig{DerivedSignal::SmvAcc, DerivedSignal::FI};
  auto cfg = calibrate(dev, sig);
  ASSERT_EQ(cfg.entries.size(), 2u);
  EXPECT_EQ(cfg.describe(), "threshold(SMV_acc+FI)");
  for (std::size_t i = 0; i < sets.size(); ++i) EXPECT_EQ(detect(sets[i], cfg).label, dev[i].label);
  EXPECT_THROW(calibrate(dev, std::span<const DerivedSignal>{}), Error);
}

TEST(ConfigText, RoundTripIsByteExact) {
  auto cfg = config({{DerivedSignal::SmvAcc, 2.35}, {DerivedSignal::FI, 4.1000000000000005},
                     {DerivedSignal::SmvGyr, 240.0}, {DerivedSignal::AVD, 1.75}});
  std::ostringstream a;
  write_threshold_config(a, cfg);
  std::istringstream in(a.str());
  auto back = read_threshold_config(in);
  EXPECT_EQ(back, cfg);
  std::ostringstream b;
  write_threshold_config(b, back);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str().find("SMV_gyr = 240 deg/s"), std::string::npos);
}

TEST(ConfigText, ParseErrorsNameTheLine) {
  for (const char *text : {"# c\nSMV_acc = 2.5 g\nbogus = 3\n", "FI = 2 deg/s\n", "FI = 2\nFI = 3\n",
                           "SMV_acc = abc g\n", "tie_policy = AdlOnTie\n", ""}) {
    std::istringstream in(text);
    try {
      read_threshold_config(in);
      FAIL() << text;
    } catch (const Error &e) {
      EXPECT_TRUE(e.code() == ErrorCode::ParseError || e.code() == ErrorCode::NoSignalsEnabled) << text;
    }
  }
  std::istringstream in("SMV_acc = 2.5 g\n\nbogus = 3\n");
  try {
    read_threshold_config(in);
  } catch (const Error &e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

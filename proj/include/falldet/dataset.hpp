#pragma once

// Corpus ingestion: table-driven raw-dataset adapters, the canonical
// CSV + JSON-lines interchange format, and a synthetic corpus generator.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "falldet/error.hpp"
#include "falldet/numfmt.hpp"
#include "falldet/random.hpp"
#include "falldet/signal.hpp"

namespace falldet {

namespace fs = std::filesystem;

struct TaskInfo {
  Label label = Label::ADL;
  std::string description;
};

struct ExpectedCounts {
  std::size_t participants = 0;
  std::size_t adl = 0;
  std::size_t fall = 0;
  std::size_t trials() const { return adl + fall; }
};

/// Column reference: either a zero-based index or a header name.
struct ColumnRef {
  int index = -1;
  std::string name;
};

enum class RawLayoutKind { Wide, Long };
enum class TimeMode { Index, Counter, Seconds };

/// How one raw file maps onto SensorSample rows.
struct RawLayout {
  RawLayoutKind kind = RawLayoutKind::Wide;
  char delimiter = ',';
  std::string comment_prefix = "#";
  /// Non-comment lines to skip before data; when column names are used
  /// the last skipped line is the header.
  std::size_t header_lines = 1;
  TimeMode time_mode = TimeMode::Index;
  ColumnRef time_column;
  double time_scale = 1.0;
  std::array<ColumnRef, 3> acc_columns{};
  std::array<ColumnRef, 3> gyr_columns{};
  double acc_scale = 1.0;
  double gyr_scale = 1.0;
  // Long layout: one row per (sensor, reading).
  ColumnRef sensor_type_column;
  ColumnRef sensor_id_column;
  std::string sensor_id;
  std::string acc_type = "0";
  std::string gyr_type = "1";
};

struct SyntheticSpec {
  std::uint64_t seed = 42;
  std::size_t subjects = 10;
  std::size_t trials_per_subject = 20;
  double rate_hz = 25.0;
};

struct DatasetManifest {
  Source source = Source::Canonical;
  fs::path root;
  std::map<std::string, TaskInfo> tasks;
  std::optional<ExpectedCounts> expected;
  std::vector<std::string> participants;
  std::string position = "wrist";
  double rate_hz = 25.0;
  std::string path_pattern;
  std::size_t subject_group = 1;
  std::size_t activity_group = 2;
  RawLayout layout;
  SyntheticSpec synthetic;
};

struct SkippedFile {
  std::string path;
  std::string reason;
};

struct IngestReport {
  std::size_t files_seen = 0;
  std::size_t files_matched = 0;
  std::size_t trials = 0;
  std::size_t adl = 0;
  std::size_t fall = 0;
  std::set<std::string> subjects;
  std::vector<SkippedFile> skipped;

  std::string summary() const {
    return std::to_string(trials) + " trials (" + std::to_string(adl) + " ADL / " +
           std::to_string(fall) + " fall)";
  }

  /// Empty when the counts equal the expectation; otherwise a description.
  std::string check(const ExpectedCounts &e) const {
    std::string out;
    if (trials != e.trials() || adl != e.adl || fall != e.fall)
      out += "expected " + std::to_string(e.trials()) + " trials (" + std::to_string(e.adl) +
             " ADL / " + std::to_string(e.fall) + " fall), got " + summary() + ". ";
    if (e.participants && subjects.size() != e.participants)
      out += "expected " + std::to_string(e.participants) + " participants, got " +
             std::to_string(subjects.size()) + ".";
    return out;
  }
};

struct Corpus {
  std::vector<TrialRecording> trials;
  IngestReport report;
};

// ---------------------------------------------------------------------------
// Manifest parsing

namespace detail {

inline ColumnRef column_from_json(const nlohmann::json &j) {
  ColumnRef c;
  if (j.is_number_integer()) c.index = j.get<int>();
  else if (j.is_string()) c.name = j.get<std::string>();
  else throw Error(ErrorCode::InvalidConfig, "column must be an index or a header name");
  return c;
}

inline std::array<ColumnRef, 3> columns3(const nlohmann::json &j, const char *key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3)
    throw Error(ErrorCode::InvalidConfig, std::string("layout.") + key + " needs 3 columns");
  return {column_from_json(j[key][0]), column_from_json(j[key][1]), column_from_json(j[key][2])};
}

inline void reject_unknown_keys(const nlohmann::json &j, std::initializer_list<const char *> known,
                                const std::string &where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = std::any_of(known.begin(), known.end(), [&](const char *k) { return it.key() == k; });
    if (!ok) throw Error(ErrorCode::InvalidConfig, "unknown key '" + it.key() + "' in " + where);
  }
}

inline RawLayout layout_from_json(const nlohmann::json &j) {
  reject_unknown_keys(j,
                      {"kind", "delimiter", "comment_prefix", "header_lines", "time_mode",
                       "time_column", "time_scale", "acc_columns", "gyr_columns", "acc_scale",
                       "gyr_scale", "sensor_type_column", "sensor_id_column", "sensor_id",
                       "acc_type", "gyr_type"},
                      "layout");
  RawLayout l;
  auto kind = j.value("kind", std::string("wide"));
  if (kind == "wide") l.kind = RawLayoutKind::Wide;
  else if (kind == "long") l.kind = RawLayoutKind::Long;
  else throw Error(ErrorCode::InvalidConfig, "layout.kind must be 'wide' or 'long'");
  auto delim = j.value("delimiter", std::string(","));
  if (delim == "\\t" || delim == "tab") delim = "\t";
  if (delim.size() != 1) throw Error(ErrorCode::InvalidConfig, "layout.delimiter must be one character");
  l.delimiter = delim[0];
  l.comment_prefix = j.value("comment_prefix", std::string("#"));
  l.header_lines = j.value("header_lines", std::size_t{1});
  auto mode = j.value("time_mode", std::string("index"));
  if (mode == "index") l.time_mode = TimeMode::Index;
  else if (mode == "counter") l.time_mode = TimeMode::Counter;
  else if (mode == "seconds") l.time_mode = TimeMode::Seconds;
  else throw Error(ErrorCode::InvalidConfig, "layout.time_mode must be index, counter or seconds");
  if (j.contains("time_column")) l.time_column = column_from_json(j["time_column"]);
  if (l.time_mode != TimeMode::Index && l.time_column.index < 0 && l.time_column.name.empty())
    throw Error(ErrorCode::InvalidConfig, "layout.time_column required for this time_mode");
  l.time_scale = j.value("time_scale", 1.0);
  l.acc_columns = columns3(j, "acc_columns");
  l.gyr_columns = l.kind == RawLayoutKind::Wide ? columns3(j, "gyr_columns") : l.acc_columns;
  l.acc_scale = j.value("acc_scale", 1.0);
  l.gyr_scale = j.value("gyr_scale", 1.0);
  if (l.kind == RawLayoutKind::Long) {
    if (!j.contains("sensor_type_column") || !j.contains("sensor_id_column") || !j.contains("sensor_id"))
      throw Error(ErrorCode::InvalidConfig,
                  "long layout needs sensor_type_column, sensor_id_column and sensor_id");
    l.sensor_type_column = column_from_json(j["sensor_type_column"]);
    l.sensor_id_column = column_from_json(j["sensor_id_column"]);
    l.sensor_id = j["sensor_id"].is_string() ? j["sensor_id"].get<std::string>()
                                             : std::to_string(j["sensor_id"].get<long>());
    auto text = [](const nlohmann::json &v) {
      return v.is_string() ? v.get<std::string>() : std::to_string(v.get<long>());
    };
    if (j.contains("acc_type")) l.acc_type = text(j["acc_type"]);
    if (j.contains("gyr_type")) l.gyr_type = text(j["gyr_type"]);
  }
  return l;
}

} // namespace detail

/// Relative roots resolve against `base_dir` (normally the manifest's folder).
inline DatasetManifest manifest_from_json(const nlohmann::json &j, const fs::path &base_dir = {}) {
  detail::reject_unknown_keys(j,
                              {"source", "root", "tasks", "expected", "participants", "position",
                               "rate_hz", "path_pattern", "subject_group", "activity_group",
                               "layout", "synthetic", "description"},
                              "manifest");
  DatasetManifest m;
  m.source = parse_source(j.at("source").get<std::string>());
  fs::path root = j.value("root", std::string("."));
  m.root = root.is_absolute() ? root : base_dir / root;
  m.position = j.value("position", std::string("wrist"));
  m.rate_hz = j.value("rate_hz", 25.0);
  m.path_pattern = j.value("path_pattern", std::string());
  m.subject_group = j.value("subject_group", std::size_t{1});
  m.activity_group = j.value("activity_group", std::size_t{2});
  if (j.contains("participants"))
    m.participants = j["participants"].get<std::vector<std::string>>();
  if (j.contains("expected")) {
    const auto &e = j["expected"];
    m.expected = ExpectedCounts{e.value("participants", std::size_t{0}), e.value("adl", std::size_t{0}),
                                e.value("fall", std::size_t{0})};
  }
  if (j.contains("tasks"))
    for (auto it = j["tasks"].begin(); it != j["tasks"].end(); ++it) {
      TaskInfo t;
      if (it.value().is_string()) {
        t.label = parse_label(it.value().get<std::string>());
      } else {
        t.label = parse_label(it.value().at("label").get<std::string>());
        t.description = it.value().value("description", std::string());
      }
      m.tasks[it.key()] = t;
    }
  if (j.contains("layout")) m.layout = detail::layout_from_json(j["layout"]);
  if (j.contains("synthetic")) {
    const auto &s = j["synthetic"];
    m.synthetic.seed = s.value("seed", std::uint64_t{42});
    m.synthetic.subjects = s.value("subjects", std::size_t{10});
    m.synthetic.trials_per_subject = s.value("trials_per_subject", std::size_t{20});
    m.synthetic.rate_hz = s.value("rate_hz", 25.0);
  }
  if ((m.source == Source::Erciyes || m.source == Source::UMAFall) && m.path_pattern.empty())
    throw Error(ErrorCode::InvalidConfig, "raw-corpus manifests need a path_pattern");
  return m;
}

inline DatasetManifest load_manifest(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorCode::ParseError, "manifest '" + path.string() + "': " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

// ---------------------------------------------------------------------------
// Raw file parsing

namespace detail {

inline std::vector<std::string> split_fields(const std::string &line, char delimiter) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, delimiter)) out.emplace_back(trim(field));
  if (!line.empty() && line.back() == delimiter) out.emplace_back();
  return out;
}

inline int resolve(const ColumnRef &c, const std::vector<std::string> &header) {
  if (c.index >= 0) return c.index;
  if (c.name.empty()) return -1;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == c.name) return static_cast<int>(i);
  throw Error(ErrorCode::ParseError, "column '" + c.name + "' not in header");
}

inline double field_number(const std::vector<std::string> &fields, int col, std::size_t line_no) {
  if (col < 0 || static_cast<std::size_t>(col) >= fields.size())
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": missing column " +
                                           std::to_string(col));
  auto v = parse_double(fields[static_cast<std::size_t>(col)]);
  if (!v)
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad number '" +
                                           fields[static_cast<std::size_t>(col)] + "'");
  return *v;
}

} // namespace detail

/// Parse one raw file into samples. Timestamps are rebased to start at 0.
inline std::vector<SensorSample> parse_raw_file(const fs::path &file, const RawLayout &layout,
                                                double rate_hz) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + file.string() + "'");
  std::string line;
  std::size_t line_no = 0, skipped_headers = 0;
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = trim(line);
    if (text.empty()) continue;
    if (!layout.comment_prefix.empty() && text.substr(0, layout.comment_prefix.size()) == layout.comment_prefix)
      continue;
    auto fields = detail::split_fields(std::string(text), layout.delimiter);
    if (skipped_headers < layout.header_lines) {
      ++skipped_headers;
      header = std::move(fields);
      continue;
    }
    rows.emplace_back(line_no, std::move(fields));
  }

  auto cols3 = [&](const std::array<ColumnRef, 3> &c) {
    return std::array<int, 3>{detail::resolve(c[0], header), detail::resolve(c[1], header),
                              detail::resolve(c[2], header)};
  };
  const int time_col = detail::resolve(layout.time_column, header);
  auto time_of = [&](const std::vector<std::string> &fields, std::size_t line_no_, std::size_t index) {
    switch (layout.time_mode) {
    case TimeMode::Index: return static_cast<double>(index) / rate_hz;
    case TimeMode::Counter: return detail::field_number(fields, time_col, line_no_) / rate_hz;
    case TimeMode::Seconds: return detail::field_number(fields, time_col, line_no_) * layout.time_scale;
    }
    return 0.0;
  };

  std::vector<SensorSample> samples;
  if (layout.kind == RawLayoutKind::Wide) {
    auto acc = cols3(layout.acc_columns);
    auto gyr = cols3(layout.gyr_columns);
    samples.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto &[ln, fields] = rows[i];
      SensorSample s;
      s.t = time_of(fields, ln, i);
      for (int a = 0; a < 3; ++a) {
        s.acc[a] = detail::field_number(fields, acc[a], ln) * layout.acc_scale;
        s.gyr[a] = detail::field_number(fields, gyr[a], ln) * layout.gyr_scale;
      }
      samples.push_back(s);
    }
  } else {
    auto xyz = cols3(layout.acc_columns);
    const int type_col = detail::resolve(layout.sensor_type_column, header);
    const int id_col = detail::resolve(layout.sensor_id_column, header);
    std::vector<SensorSample> acc_rows, gyr_rows;
    for (const auto &[ln, fields] : rows) {
      auto field = [&](int c) -> const std::string & {
        if (c < 0 || static_cast<std::size_t>(c) >= fields.size())
          throw Error(ErrorCode::ParseError, "line " + std::to_string(ln) + ": missing column");
        return fields[static_cast<std::size_t>(c)];
      };
      if (field(id_col) != layout.sensor_id) continue;
      const auto &type = field(type_col);
      const bool is_acc = type == layout.acc_type;
      if (!is_acc && type != layout.gyr_type) continue;
      auto &dest = is_acc ? acc_rows : gyr_rows;
      SensorSample s;
      s.t = time_of(fields, ln, dest.size());
      const double scale = is_acc ? layout.acc_scale : layout.gyr_scale;
      for (int a = 0; a < 3; ++a) s.acc[a] = detail::field_number(fields, xyz[a], ln) * scale;
      dest.push_back(s);
    }
    const std::size_t n = std::min(acc_rows.size(), gyr_rows.size());
    samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      SensorSample s;
      s.t = acc_rows[i].t;
      s.acc = acc_rows[i].acc;
      s.gyr = gyr_rows[i].acc;
      samples.push_back(s);
    }
  }
  if (!samples.empty()) {
    const double t0 = samples.front().t;
    for (auto &s : samples) s.t -= t0;
  }
  return samples;
}

// ---------------------------------------------------------------------------
// Canonical format: <dir>/index.jsonl plus one CSV per trial under trials/.

inline constexpr const char *kCanonicalHeader = "t,acc_x,acc_y,acc_z,gyr_x,gyr_y,gyr_z";
inline constexpr const char *kCanonicalIndex = "index.jsonl";

inline void write_trial_csv(std::ostream &os, const TrialRecording &trial) {
  os << kCanonicalHeader << '\n';
  for (const auto &s : trial.samples) {
    os << format_double(s.t);
    for (double v : s.acc) os << ',' << format_double(v);
    for (double v : s.gyr) os << ',' << format_double(v);
    os << '\n';
  }
}

/// Parse one canonical CSV row ("t,ax,ay,az,gx,gy,gz"). Returns nullopt on
/// malformed input and leaves `why` describing the problem.
inline std::optional<SensorSample> parse_canonical_row(std::string_view line, std::string *why = nullptr) {
  SensorSample s;
  std::array<double *, 7> dest{&s.t, &s.acc[0], &s.acc[1], &s.acc[2], &s.gyr[0], &s.gyr[1], &s.gyr[2]};
  std::size_t field = 0;
  std::size_t start = 0;
  line = trim(line);
  while (true) {
    auto comma = line.find(',', start);
    auto token = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (field >= dest.size()) {
      if (why) *why = "too many fields";
      return std::nullopt;
    }
    auto v = parse_double(token);
    if (!v || !std::isfinite(*v)) {
      if (why) *why = "bad value '" + std::string(token) + "'";
      return std::nullopt;
    }
    *dest[field++] = *v;
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (field != dest.size()) {
    if (why) *why = "expected 7 fields, got " + std::to_string(field);
    return std::nullopt;
  }
  return s;
}

inline std::vector<SensorSample> read_trial_csv(std::istream &is, const std::string &name) {
  std::vector<SensorSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line_no == 1) {
      if (trim(line) != kCanonicalHeader)
        throw Error(ErrorCode::ParseError, name + ":1: unexpected header");
      continue;
    }
    if (trim(line).empty()) continue;
    std::string why;
    auto s = parse_canonical_row(line, &why);
    if (!s) throw Error(ErrorCode::ParseError, name + ":" + std::to_string(line_no) + ": " + why);
    if (s->t < 0.0)
      throw Error(ErrorCode::ParseError, name + ":" + std::to_string(line_no) + ": negative timestamp");
    if (!samples.empty() && !(s->t > samples.back().t))
      throw Error(ErrorCode::ParseError,
                  name + ":" + std::to_string(line_no) + ": timestamps not strictly increasing");
    samples.push_back(*s);
  }
  if (line_no == 0) throw Error(ErrorCode::ParseError, name + ":1: empty file");
  return samples;
}

inline std::string canonical_trial_path(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "trials/%06zu.csv", index);
  return buf;
}

inline void write_canonical(std::span<const TrialRecording> trials, const fs::path &dir) {
  fs::create_directories(dir / "trials");
  std::ofstream index(dir / kCanonicalIndex, std::ios::binary);
  if (!index) throw Error(ErrorCode::Io, "cannot write '" + (dir / kCanonicalIndex).string() + "'");
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto &t = trials[i];
    validate(t);
    const auto rel = canonical_trial_path(i);
    nlohmann::json j;
    j["id"] = t.id;
    j["subject_id"] = t.subject_id;
    j["activity_code"] = t.activity_code;
    j["label"] = to_string(t.label);
    j["rate"] = t.sample_rate_hz;
    j["source"] = to_string(t.source);
    j["path"] = rel;
    index << j.dump() << '\n';
    std::ofstream csv(dir / rel, std::ios::binary);
    if (!csv) throw Error(ErrorCode::Io, "cannot write '" + (dir / rel).string() + "'");
    write_trial_csv(csv, t);
  }
}

/// `path` may be the corpus directory or its index file.
inline std::vector<TrialRecording> read_canonical(const fs::path &path) {
  const fs::path index_path = fs::is_directory(path) ? path / kCanonicalIndex : path;
  const fs::path dir = index_path.parent_path();
  std::ifstream index(index_path);
  if (!index) throw Error(ErrorCode::Io, "cannot open '" + index_path.string() + "'");
  std::vector<TrialRecording> trials;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(index, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = index_path.string() + ":" + std::to_string(line_no);
    TrialRecording t;
    fs::path rel;
    try {
      auto j = nlohmann::json::parse(line);
      t.id = j.at("id").get<std::string>();
      t.subject_id = j.at("subject_id").get<std::string>();
      t.activity_code = j.at("activity_code").get<std::string>();
      t.label = parse_label(j.at("label").get<std::string>());
      t.sample_rate_hz = j.at("rate").get<double>();
      t.source = parse_source(j.value("source", std::string("Canonical")));
      rel = j.at("path").get<std::string>();
    } catch (const nlohmann::json::exception &e) {
      throw Error(ErrorCode::ParseError, where + ": " + e.what());
    } catch (const Error &e) {
      throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
    std::ifstream csv(dir / rel);
    if (!csv) throw Error(ErrorCode::Io, where + ": cannot open '" + (dir / rel).string() + "'");
    t.samples = read_trial_csv(csv, (dir / rel).string());
    if (auto why = check_recording(t); !why.empty())
      throw Error(ErrorCode::ParseError, where + ": " + why);
    trials.push_back(std::move(t));
  }
  return trials;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

inline const std::map<std::string, TaskInfo> &synthetic_tasks() {
  static const std::map<std::string, TaskInfo> tasks{
      {"SYN-ADL-1", {Label::ADL, "slow sway"}},
      {"SYN-ADL-2", {Label::ADL, "walking-like oscillation"}},
      {"SYN-ADL-3", {Label::ADL, "arm gesture"}},
      {"SYN-FALL-1", {Label::Fall, "forward fall"}},
      {"SYN-FALL-2", {Label::Fall, "backward fall"}},
      {"SYN-FALL-3", {Label::Fall, "lateral fall"}},
  };
  return tasks;
}

namespace detail {

inline Vec3 unit(Vec3 v) {
  double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

inline Vec3 random_unit(std::mt19937_64 &rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v{g(rng), g(rng), g(rng)};
  return unit(v);
}

/// Gravity direction tilted at most `max_tilt_deg` away from `axis`.
inline Vec3 tilted(const Vec3 &axis, double max_tilt_deg, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double k = std::tan(max_tilt_deg * std::numbers::pi / 180.0) / std::sqrt(2.0);
  Vec3 v = axis;
  for (double &c : v) c += k * u(rng) * (c == 0.0 ? 1.0 : 0.0);
  return unit(v);
}

} // namespace detail

/// ADL trials stay below 2 g peak SMV; fall trials have a free-fall dip to
/// about 0.3 g, an impact spike of 3-6 g and a changed resting posture.
inline std::vector<TrialRecording> synthesize(std::uint64_t seed, std::size_t n_subjects,
                                              std::size_t trials_per_subject, double rate_hz = 25.0) {
  if (n_subjects < 2) throw Error(ErrorCode::InvalidConfig, "synthesize needs at least 2 subjects");
  std::vector<TrialRecording> out;
  out.reserve(n_subjects * trials_per_subject);
  const double two_pi = 2.0 * std::numbers::pi;
  const double dt = 1.0 / rate_hz;

  for (std::size_t subj = 0; subj < n_subjects; ++subj) {
    char sid[32];
    std::snprintf(sid, sizeof(sid), "S%02zu", subj + 1);
    for (std::size_t k = 0; k < trials_per_subject; ++k) {
      std::mt19937_64 rng(derive_seed(seed, (subj << 20) + k));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
      const bool fall = k % 2 == 1;
      const int variant = static_cast<int>(rng() % 3) + 1;

      TrialRecording t;
      t.subject_id = sid;
      t.activity_code = std::string(fall ? "SYN-FALL-" : "SYN-ADL-") + std::to_string(variant);
      t.label = fall ? Label::Fall : Label::ADL;
      t.sample_rate_hz = rate_hz;
      t.source = Source::Synthetic;
      char id[64];
      std::snprintf(id, sizeof(id), "%s/%s/%03zu", sid, t.activity_code.c_str(), k);
      t.id = id;

      const double duration = uniform(10.0, 15.0);
      const auto n = static_cast<std::size_t>(duration * rate_hz);
      const Vec3 g0 = detail::tilted({0.0, 0.0, 1.0}, 30.0, rng);
      // Per-axis oscillation: amplitude (g), frequency (Hz), phase.
      std::array<double, 3> amp{}, freq{}, phase{}, gamp{}, gfreq{}, gphase{};
      const double amp_hi = variant == 1 ? 0.08 : variant == 2 ? 0.25 : 0.18;
      for (int a = 0; a < 3; ++a) {
        amp[a] = uniform(0.02, amp_hi);
        freq[a] = uniform(0.3, variant == 2 ? 2.5 : 1.2);
        phase[a] = uniform(0.0, two_pi);
        gamp[a] = uniform(5.0, variant == 3 ? 80.0 : 40.0);
        gfreq[a] = uniform(0.3, 2.0);
        gphase[a] = uniform(0.0, two_pi);
      }
      const double noise = 0.03, gnoise = 3.0;

      // Fall timeline (seconds).
      const double t_fall = uniform(3.0, std::max(3.5, duration - 5.0));
      const double freefall = uniform(0.3, 0.5);
      const double t_impact = t_fall + freefall;
      const double impact_peak = uniform(3.2, 5.8);
      const Vec3 impact_dir = detail::random_unit(rng);
      static const std::array<Vec3, 3> kLying{Vec3{1, 0, 0}, Vec3{-1, 0, 0}, Vec3{0, 1, 0}};
      const Vec3 g1 = detail::tilted(kLying[static_cast<std::size_t>(variant - 1)], 20.0, rng);
      const Vec3 spin_axis = detail::random_unit(rng);
      const double spin_rate = uniform(150.0, 400.0);

      t.samples.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double time = static_cast<double>(i) * dt;
        SensorSample s;
        s.t = time;
        double motion = 1.0;
        Vec3 g = g0;
        Vec3 gyr_extra{0, 0, 0};
        if (fall) {
          if (time >= t_fall && time < t_impact) {
            // Free fall: sensed acceleration collapses towards ~0.3 g.
            const double x = (time - t_fall) / freefall;
            const double scale = 1.0 - 0.7 * std::min(1.0, 3.0 * x);
            for (int a = 0; a < 3; ++a) g[a] = g0[a] * scale;
            for (int a = 0; a < 3; ++a) gyr_extra[a] = spin_rate * spin_axis[a];
            motion = 0.3;
          } else if (time >= t_impact) {
            g = g1;
            motion = 0.15;
          }
        }
        for (int a = 0; a < 3; ++a) {
          s.acc[a] = g[a] + motion * amp[a] * std::sin(two_pi * freq[a] * time + phase[a]) +
                     motion * noise * uniform(-1.0, 1.0);
          s.gyr[a] = motion * gamp[a] * std::sin(two_pi * gfreq[a] * time + gphase[a]) +
                     gnoise * uniform(-1.0, 1.0) + gyr_extra[a];
        }
        if (fall) {
          const auto impact_index = static_cast<std::size_t>(std::ceil(t_impact * rate_hz));
          if (i == impact_index) {
            for (int a = 0; a < 3; ++a) s.acc[a] = impact_peak * impact_dir[a];
          } else if (i + 1 == impact_index || i == impact_index + 1) {
            for (int a = 0; a < 3; ++a) s.acc[a] = 0.5 * impact_peak * impact_dir[a];
          }
        }
        t.samples.push_back(s);
      }
      out.push_back(std::move(t));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ingestion entry point

namespace detail {

struct FileJob {
  fs::path path;
  std::string rel;
  std::string subject;
  std::string activity;
  std::optional<TrialRecording> trial;
  std::string skip_reason;
};

inline void parse_job(FileJob &job, const DatasetManifest &m) {
  try {
    TrialRecording t;
    t.subject_id = job.subject;
    t.activity_code = job.activity;
    t.label = m.tasks.at(job.activity).label;
    t.sample_rate_hz = m.rate_hz;
    t.source = m.source;
    t.id = job.rel;
    t.samples = parse_raw_file(job.path, m.layout, m.rate_hz);
    if (auto why = check_recording(t); !why.empty()) {
      job.skip_reason = "InvalidRecording: " + why;
      return;
    }
    job.trial = std::move(t);
  } catch (const Error &e) {
    job.skip_reason = e.what();
  }
}

} // namespace detail

inline Corpus ingest(const DatasetManifest &m) {
  if (m.source != Source::Synthetic && (m.root.empty() || !fs::is_directory(m.root)))
    throw Error(ErrorCode::ManifestRootMissing, "'" + m.root.string() + "' is not a directory");

  Corpus corpus;
  auto &report = corpus.report;

  auto admit = [&](TrialRecording t) {
    ++report.trials;
    (t.label == Label::Fall ? report.fall : report.adl) += 1;
    report.subjects.insert(t.subject_id);
    corpus.trials.push_back(std::move(t));
  };

  if (m.source == Source::Synthetic) {
    for (auto &t : synthesize(m.synthetic.seed, m.synthetic.subjects, m.synthetic.trials_per_subject,
                              m.synthetic.rate_hz))
      admit(std::move(t));
    return corpus;
  }
  if (m.source == Source::Canonical) {
    if (!fs::exists(m.root / kCanonicalIndex)) return corpus;
    for (auto &t : read_canonical(m.root)) {
      ++report.files_seen;
      ++report.files_matched;
      admit(std::move(t));
    }
    return corpus;
  }

  std::vector<std::pair<std::string, fs::path>> files;
  for (const auto &entry : fs::recursive_directory_iterator(m.root)) {
    if (!entry.is_regular_file()) continue;
    files.emplace_back(fs::relative(entry.path(), m.root).generic_string(), entry.path());
  }
  std::sort(files.begin(), files.end());
  report.files_seen = files.size();

  const std::regex pattern(m.path_pattern);
  const std::set<std::string> allowed(m.participants.begin(), m.participants.end());
  std::vector<detail::FileJob> jobs;
  for (auto &[rel, path] : files) {
    std::smatch match;
    if (!std::regex_search(rel, match, pattern)) continue;
    ++report.files_matched;
    if (match.size() <= std::max(m.subject_group, m.activity_group))
      throw Error(ErrorCode::InvalidConfig, "path_pattern lacks the configured capture groups");
    detail::FileJob job{path, rel, match[m.subject_group].str(), match[m.activity_group].str(), {}, {}};
    if (!m.tasks.count(job.activity)) {
      report.skipped.push_back({rel, std::string("UnknownActivityCode: '") + job.activity + "'"});
      continue;
    }
    if (!allowed.empty() && !allowed.count(job.subject)) {
      report.skipped.push_back({rel, "subject '" + job.subject + "' not in participant list"});
      continue;
    }
    jobs.push_back(std::move(job));
  }

  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(1, jobs.size()));
  if (workers <= 1) {
    for (auto &job : jobs) detail::parse_job(job, m);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < jobs.size(); i += workers) detail::parse_job(jobs[i], m);
      });
    for (auto &th : pool) th.join();
  }

  for (auto &job : jobs) {
    if (job.trial) admit(std::move(*job.trial));
    else report.skipped.push_back({job.rel, job.skip_reason});
  }
  std::sort(report.skipped.begin(), report.skipped.end(),
            [](const SkippedFile &a, const SkippedFile &b) { return a.path < b.path; });
  return corpus;
}

} // namespace falldet

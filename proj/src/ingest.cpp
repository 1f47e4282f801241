#include "entropyclust/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <limits>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "entropyclust/error.hpp"
#include "entropyclust/rng.hpp"

namespace entropyclust {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string_view unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(unquote(line.substr(pos)));
      break;
    }
    out.push_back(unquote(line.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

Error line_error(ErrorKind kind, std::size_t line_no, std::string_view detail) {
  return Error(kind, "line " + std::to_string(line_no) + ": " + std::string(detail));
}

}  // namespace

EpochSeconds parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  const std::string_view s = trim(text);
  auto fail = [&] { return Error(ErrorKind::InvalidInput, "bad timestamp '" + std::string(s) + "'"); };

  // YYYY-MM-DD
  if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
    throw fail();
  int y = 0, mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
  if (!parse_int(s.substr(0, 4), y) || !parse_int(s.substr(5, 2), mo) ||
      !parse_int(s.substr(8, 2), d) || !parse_int(s.substr(11, 2), hh) ||
      !parse_int(s.substr(14, 2), mm))
    throw fail();
  std::size_t pos = 16;
  if (pos < s.size() && s[pos] == ':') {
    if (pos + 3 > s.size() || !parse_int(s.substr(pos + 1, 2), ss)) throw fail();
    pos += 3;
  }
  int offset_minutes = 0;
  if (pos < s.size()) {
    const std::string_view zone = s.substr(pos);
    if (zone == "Z") {
    } else if ((zone[0] == '+' || zone[0] == '-') && zone.size() == 6 && zone[3] == ':') {
      int oh = 0, om = 0;
      if (!parse_int(zone.substr(1, 2), oh) || !parse_int(zone.substr(4, 2), om)) throw fail();
      offset_minutes = (zone[0] == '+' ? 1 : -1) * (oh * 60 + om);
    } else {
      throw fail();
    }
  }

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59 || hh < 0 || mm < 0 || ss < 0) throw fail();
  const auto t = sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} - minutes{offset_minutes};
  return duration_cast<seconds>(t.time_since_epoch()).count();
}

std::string format_timestamp(EpochSeconds t) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{t}};
  const auto day_point = floor<days>(tp);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{tp - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

RawReadings parse_long_csv(std::istream& in, const ParseOptions& opts) {
  RawReadings out;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::set<std::pair<std::string, EpochSeconds>> seen;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view);
    if (!header_seen) {
      if (fields.size() != 3 || fields[0] != "consumer_id" || fields[1] != "timestamp" ||
          fields[2] != "kwh")
        throw line_error(ErrorKind::MalformedLine, line_no,
                         "expected header consumer_id,timestamp,kwh");
      header_seen = true;
      continue;
    }
    if (fields.size() != 3 || fields[0].empty())
      throw line_error(ErrorKind::MalformedLine, line_no, "expected 3 fields");

    Reading r;
    r.consumer_id = std::string(fields[0]);
    try {
      r.timestamp = parse_timestamp(fields[1]);
    } catch (const Error& e) {
      throw line_error(ErrorKind::MalformedLine, line_no, e.what());
    }
    if (!parse_double(fields[2], r.kwh) || !std::isfinite(r.kwh))
      throw line_error(ErrorKind::NonNumericValue, line_no, "'" + std::string(fields[2]) + "'");
    if (r.kwh < 0.0 && !opts.allow_negative)
      throw line_error(ErrorKind::NegativeValue, line_no, "'" + std::string(fields[2]) + "'");
    if (!seen.emplace(r.consumer_id, r.timestamp).second)
      throw Error(ErrorKind::DuplicateReading,
                  r.consumer_id + " at " + format_timestamp(r.timestamp));
    out.records.push_back(std::move(r));
  }
  if (!header_seen) throw Error(ErrorKind::MalformedLine, "line 1: missing header");
  return out;
}

void validate(const FeatureMatrix& fm) {
  if (fm.time_index.size() != fm.values.rows())
    throw Error(ErrorKind::InvalidInput, "time index length differs from row count");
  if (fm.consumer_ids.size() != fm.values.cols())
    throw Error(ErrorKind::InvalidInput, "consumer id count differs from column count");
  if (fm.time_index.size() >= 2) {
    const EpochSeconds step = fm.time_index[1] - fm.time_index[0];
    if (step <= 0) throw Error(ErrorKind::InvalidInput, "time index not increasing");
    for (std::size_t i = 2; i < fm.time_index.size(); ++i)
      if (fm.time_index[i] - fm.time_index[i - 1] != step)
        throw Error(ErrorKind::InvalidInput,
                    "non-constant time step at " + format_timestamp(fm.time_index[i]));
  }
  for (double v : fm.values.data()) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "non-finite value");
    if (v < 0.0 && !fm.allow_negative) throw Error(ErrorKind::InvalidInput, "negative value");
  }
}

FeatureMatrix align_and_pivot(const RawReadings& readings, EpochSeconds period, FillPolicy fill) {
  if (period <= 0) throw Error(ErrorKind::InvalidConfig, "period must be positive");
  if (readings.records.empty()) throw Error(ErrorKind::InvalidInput, "no readings");

  EpochSeconds origin = readings.records.front().timestamp;
  for (const auto& r : readings.records) origin = std::min(origin, r.timestamp);

  // Lexicographic consumer order comes from the map.
  std::map<std::string, std::map<EpochSeconds, double>> by_consumer;
  bool any_negative = false;
  for (const auto& r : readings.records) {
    if ((r.timestamp - origin) % period != 0)
      throw Error(ErrorKind::MisalignedTimestamp,
                  r.consumer_id + " at " + format_timestamp(r.timestamp));
    if (!by_consumer[r.consumer_id].emplace(r.timestamp, r.kwh).second)
      throw Error(ErrorKind::DuplicateReading,
                  r.consumer_id + " at " + format_timestamp(r.timestamp));
    any_negative = any_negative || r.kwh < 0.0;
  }

  EpochSeconds start = std::numeric_limits<EpochSeconds>::min();
  EpochSeconds end = std::numeric_limits<EpochSeconds>::max();
  for (const auto& [id, series] : by_consumer) {
    start = std::max(start, series.begin()->first);
    end = std::min(end, series.rbegin()->first);
  }
  if (start > end)
    throw Error(ErrorKind::EmptyIntersection, "latest start " + format_timestamp(start) +
                                                  " is after earliest end " + format_timestamp(end));

  const auto rows = static_cast<std::size_t>((end - start) / period + 1);
  FeatureMatrix fm;
  fm.values = Matrix(rows, by_consumer.size());
  fm.time_index.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) fm.time_index[i] = start + static_cast<EpochSeconds>(i) * period;
  fm.allow_negative = any_negative;

  std::size_t col = 0;
  for (const auto& [id, series] : by_consumer) {
    fm.consumer_ids.push_back(id);
    for (std::size_t i = 0; i < rows; ++i) {
      const EpochSeconds t = fm.time_index[i];
      auto it = series.find(t);
      if (it == series.end()) {
        if (fill == FillPolicy::Strict)
          throw Error(ErrorKind::MissingCell, id + " at " + format_timestamp(t));
        // The consumer's first reading is at or before `start`, so a predecessor exists.
        it = std::prev(series.upper_bound(t));
      }
      fm.values(i, col) = it->second;
    }
    ++col;
  }
  return fm;
}

void write_wide_csv(std::ostream& out, const FeatureMatrix& fm) {
  out << "timestamp";
  for (const auto& id : fm.consumer_ids) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < fm.time_points(); ++i) {
    out << format_timestamp(fm.time_index[i]);
    for (double v : fm.values.row(i)) out << ',' << format_double(v);
    out << '\n';
  }
}

FeatureMatrix read_wide_csv(std::istream& in, bool allow_negative) {
  FeatureMatrix fm;
  fm.allow_negative = allow_negative;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<double> values;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view);
    if (!header_seen) {
      if (fields.size() < 2 || fields[0] != "timestamp")
        throw line_error(ErrorKind::MalformedLine, line_no, "expected header timestamp,<ids>");
      for (std::size_t c = 1; c < fields.size(); ++c) fm.consumer_ids.emplace_back(fields[c]);
      header_seen = true;
      continue;
    }
    if (fields.size() != fm.consumer_ids.size() + 1)
      throw line_error(ErrorKind::MalformedLine, line_no,
                       "expected " + std::to_string(fm.consumer_ids.size() + 1) + " fields");
    try {
      fm.time_index.push_back(parse_timestamp(fields[0]));
    } catch (const Error& e) {
      throw line_error(ErrorKind::MalformedLine, line_no, e.what());
    }
    for (std::size_t c = 1; c < fields.size(); ++c) {
      double v = 0.0;
      if (!parse_double(fields[c], v))
        throw line_error(ErrorKind::NonNumericValue, line_no, "'" + std::string(fields[c]) + "'");
      if (v < 0.0) fm.allow_negative = true;
      values.push_back(v);
    }
  }
  if (!header_seen) throw Error(ErrorKind::MalformedLine, "line 1: missing header");
  fm.values = Matrix(fm.time_index.size(), fm.consumer_ids.size());
  fm.values.data() = std::move(values);
  validate(fm);
  return fm;
}

void validate(const PlantedSpec& spec) {
  if (spec.group_count < 2) throw Error(ErrorKind::InvalidConfig, "group_count must be >= 2");
  if (spec.consumers_per_group < 1)
    throw Error(ErrorKind::InvalidConfig, "consumers_per_group must be >= 1");
  if (spec.time_points < 2) throw Error(ErrorKind::InvalidConfig, "time_points must be >= 2");
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma))
    throw Error(ErrorKind::InvalidConfig, "noise_sigma must be >= 0");
  if (!(spec.shared_fraction >= 0.0 && spec.shared_fraction < 1.0))
    throw Error(ErrorKind::InvalidConfig, "shared_fraction must be in [0, 1)");
  if (spec.period <= 0) throw Error(ErrorKind::InvalidConfig, "period must be positive");
}

PlantedData generate_planted(const PlantedSpec& spec) {
  validate(spec);
  const auto groups = static_cast<std::size_t>(spec.group_count);
  const auto per_group = static_cast<std::size_t>(spec.consumers_per_group);
  const auto M = static_cast<std::size_t>(spec.time_points);
  const std::size_t N = groups * per_group;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  constexpr double steps_per_day = 48.0;

  Rng rng(spec.seed);
  const double shared_phase = two_pi * uniform01(rng);

  // Every group shares a daily cycle and adds its own slower sinusoid with a
  // distinct cycle count, phase and amplitude, lifted by its own offset.
  const double w_shared = std::sqrt(spec.shared_fraction);
  const double w_own = std::sqrt(1.0 - spec.shared_fraction);
  Matrix base(groups, M);
  for (std::size_t g = 0; g < groups; ++g) {
    const double phase = two_pi * uniform01(rng);
    const double amplitude = 0.6 + 0.4 * uniform01(rng);
    const double offset = 2.0 + 0.5 * static_cast<double>(g);
    const double cycles = 2.0 + 3.0 * static_cast<double>(g);
    for (std::size_t t = 0; t < M; ++t) {
      const double x = static_cast<double>(t);
      const double shared = std::sin(two_pi * x / steps_per_day + shared_phase);
      const double own = std::sin(two_pi * cycles * x / static_cast<double>(M) + phase);
      base(g, t) = offset + amplitude * (w_shared * shared + w_own * own);
    }
  }

  PlantedData out;
  FeatureMatrix& fm = out.matrix;
  fm.values = Matrix(M, N);
  fm.time_index.resize(M);
  for (std::size_t t = 0; t < M; ++t)
    fm.time_index[t] = spec.start + static_cast<EpochSeconds>(t) * spec.period;

  const std::size_t width = std::max<std::size_t>(4, std::to_string(N).size());
  std::normal_distribution<double> noise(0.0, 1.0);
  out.labels.resize(N);
  // Groups are interleaved across consumer columns.
  for (std::size_t j = 0; j < N; ++j) {
    const std::size_t g = j % groups;
    out.labels[j] = static_cast<int>(g);
    std::string id = std::to_string(j + 1);
    fm.consumer_ids.push_back("c" + std::string(width - id.size(), '0') + id);
    for (std::size_t t = 0; t < M; ++t) {
      double v = base(g, t);
      if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise(rng);
      fm.values(t, j) = v;
      if (v < 0.0) fm.allow_negative = true;
    }
  }
  return out;
}

std::string labels_json(const FeatureMatrix& fm, const std::vector<int>& labels) {
  nlohmann::json labels_obj = nlohmann::json::object();
  for (std::size_t j = 0; j < fm.consumer_ids.size(); ++j) labels_obj[fm.consumer_ids[j]] = labels.at(j);
  nlohmann::json doc;
  doc["labels"] = std::move(labels_obj);
  return doc.dump(2) + "\n";
}

}  // namespace entropyclust

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cmekit/error.hpp"
#include "cmekit/estimator.hpp"
#include "cmekit/kernel.hpp"
#include "cmekit/models.hpp"

namespace cmekit::io {

// ---------------------------------------------------------------------------
// Number formatting: '.' decimal separator, 17 significant digits, no locale.

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::scientific, 16);
  return std::string(buf, res.ptr);
}

/// Shortest representation that round-trips; used in CSV reports.
inline std::string format_short(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t> parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Line-oriented token reader for the matrix-payload file formats. Blank
// lines and lines starting with '#' are skipped.

class LineReader {
 public:
  LineReader(std::string_view text, std::string source) : source_(std::move(source)) {
    std::size_t start = 0;
    int number = 0;
    while (start <= text.size()) {
      const auto end = text.find('\n', start);
      const auto line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
      ++number;
      const auto t = trim(line);
      if (!t.empty() && t.front() != '#') lines_.push_back({number, split_ws(t)});
      if (end == std::string_view::npos) break;
      start = end + 1;
    }
  }

  [[nodiscard]] bool done() const { return pos_ >= lines_.size(); }

  [[nodiscard]] const std::vector<std::string>& peek() const {
    if (done()) fail_eof();
    return lines_[pos_].tokens;
  }

  const std::vector<std::string>& next() {
    if (done()) fail_eof();
    return lines_[pos_++].tokens;
  }

  [[nodiscard]] int line_number() const { return done() ? -1 : lines_[pos_].number; }

  [[noreturn]] void fail(const std::string& msg) const {
    const int line = pos_ == 0 ? (lines_.empty() ? 0 : lines_[0].number) : lines_[pos_ - 1].number;
    throw ValidationError(source_ + ":" + std::to_string(line) + ": " + msg);
  }

  void expect_header(const std::string& magic) {
    const auto& tok = next();
    if (tok.size() != 2 || tok[0] != magic || tok[1] != "1") fail("expected header '" + magic + " 1'");
  }

  double number(const std::string& token) const {
    const auto v = parse_double(token);
    if (!v) fail("invalid number '" + token + "'");
    return *v;
  }

  Eigen::Index count(const std::string& token) const {
    const auto v = parse_int(token);
    if (!v || *v < 0) fail("invalid count '" + token + "'");
    return static_cast<Eigen::Index>(*v);
  }

  /// Reads "<name> <rows> <cols>" followed by rows lines of cols numbers.
  Eigen::MatrixXd matrix(const std::string& name) {
    const auto& head = next();
    if (head.size() != 3 || head[0] != name) fail("expected '" + name + " <rows> <cols>'");
    const auto rows = count(head[1]);
    const auto cols = count(head[2]);
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto& tok = next();
      if (static_cast<Eigen::Index>(tok.size()) != cols)
        fail(name + " row " + std::to_string(i) + ": expected " + std::to_string(cols) + " values");
      for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = number(tok[static_cast<std::size_t>(j)]);
    }
    return out;
  }

  Points points(const std::string& name) { return matrix(name); }

 private:
  struct Line {
    int number;
    std::vector<std::string> tokens;
  };

  [[noreturn]] void fail_eof() const { throw ValidationError(source_ + ": unexpected end of file"); }

  std::string source_;
  std::vector<Line> lines_;
  std::size_t pos_ = 0;
};

template <class Derived>
void write_matrix(std::ostream& out, const std::string& name, const Eigen::MatrixBase<Derived>& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Finite-model file.

inline FiniteMarkovModel parse_model(std::string_view text, const std::string& source = "model") {
  LineReader r(text, source);
  r.expect_header("cmekit-model");
  FiniteMarkovModel model;
  model.states = r.points("states");
  const auto m = model.states.rows();

  const auto& head = r.peek();
  bool stationary = false;
  if (head.size() == 2 && head[0] == "marginal" && head[1] == "stationary") {
    r.next();
    stationary = true;
  } else {
    const Eigen::MatrixXd pi = r.matrix("marginal");
    if (pi.rows() != 1 || pi.cols() != m) r.fail("marginal must be 1 x m");
    model.marginal = pi.row(0).transpose();
  }
  model.transition = r.matrix("transition");
  if (!r.done()) model.transition_alt = r.matrix("transition_alt");
  if (!r.done()) r.fail("unexpected trailing content");
  if (stationary) {
    if (model.transition.rows() != m || model.transition.cols() != m) r.fail("transition must be m x m");
    model.marginal = stationary_distribution(model.transition);
  }
  try {
    model.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return model;
}

inline FiniteMarkovModel load_model(const std::string& path) { return parse_model(read_file(path), path); }

inline std::string format_model(const FiniteMarkovModel& model) {
  std::ostringstream out;
  out << "cmekit-model 1\n";
  write_matrix(out, "states", model.states);
  write_matrix(out, "marginal", model.marginal.transpose());
  write_matrix(out, "transition", model.transition);
  if (model.transition_alt) write_matrix(out, "transition_alt", *model.transition_alt);
  return out.str();
}

// ---------------------------------------------------------------------------
// Paired-sample and point-list files.

inline PairedSample parse_sample(std::string_view text, const std::string& source = "sample") {
  LineReader r(text, source);
  r.expect_header("cmekit-sample");
  PairedSample s{r.points("X"), r.points("Y")};
  if (!r.done()) r.fail("unexpected trailing content");
  try {
    s.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return s;
}

inline PairedSample load_sample(const std::string& path) { return parse_sample(read_file(path), path); }

inline std::string format_sample(const PairedSample& s) {
  std::ostringstream out;
  out << "cmekit-sample 1\n";
  write_matrix(out, "X", s.x);
  write_matrix(out, "Y", s.y);
  return out.str();
}

inline Points parse_points(std::string_view text, const std::string& source = "points") {
  LineReader r(text, source);
  r.expect_header("cmekit-points");
  Points p = r.points("points");
  if (!r.done()) r.fail("unexpected trailing content");
  try {
    validate_points(p, "points file");
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return p;
}

inline Points load_points(const std::string& path) { return parse_points(read_file(path), path); }

inline std::string format_points(const Points& p) {
  std::ostringstream out;
  out << "cmekit-points 1\n";
  write_matrix(out, "points", p);
  return out.str();
}

// ---------------------------------------------------------------------------
// Estimator file.

inline std::string format_estimator(const CmeEstimator& est) {
  std::ostringstream out;
  out << "cmekit-estimator 1\n";
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, GaussianKernel>) {
          out << "kernel gaussian " << format_double(k.bandwidth) << '\n';
        } else if constexpr (std::is_same_v<K, LaplacianKernel>) {
          out << "kernel laplacian " << format_double(k.scale) << '\n';
        } else {
          out << "kernel table\n";
          write_matrix(out, "states", k.states);
          write_matrix(out, "values", k.values);
        }
      },
      est.kernel().variant());
  if (const auto* lw = std::get_if<Landweber>(&est.filter()))
    out << "filter landweber " << lw->steps << ' ' << format_double(lw->step_size) << '\n';
  else
    out << "filter " << filter_name(est.filter()) << '\n';
  out << "lambda " << format_double(est.lambda()) << '\n';
  write_matrix(out, "X", est.x());
  write_matrix(out, "Y", est.y());
  write_matrix(out, "W", est.coefficients());
  return out.str();
}

inline CmeEstimator parse_estimator(std::string_view text, const std::string& source = "estimator") {
  LineReader r(text, source);
  r.expect_header("cmekit-estimator");

  auto kernel = [&]() -> KernelSpec {
    const auto tok = r.next();
    if (tok.size() < 2 || tok[0] != "kernel") r.fail("expected 'kernel <type> ...'");
    try {
      if (tok[1] == "gaussian" && tok.size() == 3) return KernelSpec::gaussian(r.number(tok[2]));
      if (tok[1] == "laplacian" && tok.size() == 3) return KernelSpec::laplacian(r.number(tok[2]));
      if (tok[1] == "table" && tok.size() == 2) {
        Points states = r.points("states");
        Eigen::MatrixXd values = r.matrix("values");
        return KernelSpec::table(std::move(states), std::move(values));
      }
    } catch (const ValidationError& e) {
      if (std::string_view(e.what()).starts_with(source)) throw;
      r.fail(e.what());
    }
    r.fail("unknown kernel specification");
  }();

  const auto ftok = r.next();
  SpectralFilter filter = Tikhonov{};
  if (ftok.size() == 2 && ftok[0] == "filter" && ftok[1] == "tikhonov") filter = Tikhonov{};
  else if (ftok.size() == 2 && ftok[0] == "filter" && ftok[1] == "cutoff") filter = Cutoff{};
  else if (ftok.size() == 4 && ftok[0] == "filter" && ftok[1] == "landweber")
    filter = Landweber{static_cast<int>(r.count(ftok[2])), r.number(ftok[3])};
  else r.fail("expected 'filter tikhonov|cutoff|landweber <steps> <step_size>'");

  const auto ltok = r.next();
  if (ltok.size() != 2 || ltok[0] != "lambda") r.fail("expected 'lambda <value>'");
  const double lambda = r.number(ltok[1]);

  Points x = r.points("X");
  Points y = r.points("Y");
  Eigen::MatrixXd w = r.matrix("W");
  if (!r.done()) r.fail("unexpected trailing content");
  try {
    return CmeEstimator(std::move(kernel), lambda, filter, std::move(x), std::move(y), std::move(w));
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

inline CmeEstimator load_estimator(const std::string& path) { return parse_estimator(read_file(path), path); }

inline void save_estimator(const std::string& path, const CmeEstimator& est) { write_file(path, format_estimator(est)); }

// ---------------------------------------------------------------------------
// Experiment configuration: UTF-8 text with [section] headers and
// `key = value` lines. '#' starts a comment line.

class Config {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static Config parse(std::string_view text, std::string source = "config") {
    Config cfg;
    cfg.source_ = std::move(source);
    std::string section;
    std::size_t start = 0;
    int number = 0;
    while (start <= text.size()) {
      const auto end = text.find('\n', start);
      const auto raw = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
      ++number;
      const auto line = trim(raw);
      if (!line.empty() && line.front() != '#') {
        if (line.front() == '[') {
          if (line.back() != ']' || line.size() < 3) cfg.fail(number, "malformed section header");
          section = trim(std::string_view(line).substr(1, line.size() - 2));
          cfg.sections_.insert(section);
        } else {
          const auto eq = line.find('=');
          if (eq == std::string::npos) cfg.fail(number, "expected 'key = value'");
          if (section.empty()) cfg.fail(number, "key outside of any [section]");
          const auto key = trim(std::string_view(line).substr(0, eq));
          const auto value = trim(std::string_view(line).substr(eq + 1));
          if (key.empty()) cfg.fail(number, "empty key");
          auto [it, inserted] = cfg.entries_.try_emplace(section + "." + key, Entry{value, number});
          if (!inserted) cfg.fail(number, "duplicate key '" + key + "' in [" + section + "]");
        }
      }
      if (end == std::string_view::npos) break;
      start = end + 1;
    }
    return cfg;
  }

  static Config load(const std::string& path) { return parse(read_file(path), path); }

  [[nodiscard]] const std::string& source() const { return source_; }

  [[nodiscard]] bool has(const std::string& key) const { return entries_.count(key) != 0; }

  [[nodiscard]] bool has_section(const std::string& s) const { return sections_.count(s) != 0; }

  void set(const std::string& key, std::string value) { entries_[key] = Entry{std::move(value), 0}; }

  [[nodiscard]] std::string str(const std::string& key) const { return entry(key).value; }

  [[nodiscard]] std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
  }

  [[nodiscard]] double real(const std::string& key) const {
    const auto& e = entry(key);
    const auto v = parse_double(e.value);
    if (!v || !std::isfinite(*v)) fail(e.line, "field '" + key + "': invalid number '" + e.value + "'");
    return *v;
  }

  [[nodiscard]] double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

  [[nodiscard]] double positive(const std::string& key) const {
    const double v = real(key);
    if (!(v > 0.0)) fail(entry(key).line, "field '" + key + "': must be > 0");
    return v;
  }

  [[nodiscard]] double positive(const std::string& key, double fallback) const {
    return has(key) ? positive(key) : fallback;
  }

  [[nodiscard]] std::int64_t integer(const std::string& key, std::int64_t min_value) const {
    const auto& e = entry(key);
    const auto v = parse_int(e.value);
    if (!v) fail(e.line, "field '" + key + "': invalid integer '" + e.value + "'");
    if (*v < min_value) fail(e.line, "field '" + key + "': must be >= " + std::to_string(min_value));
    return *v;
  }

  [[nodiscard]] std::int64_t integer(const std::string& key, std::int64_t min_value, std::int64_t fallback) const {
    return has(key) ? integer(key, min_value) : fallback;
  }

  [[nodiscard]] std::uint64_t u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& e = entry(key);
    const auto v = parse_u64(e.value);
    if (!v) fail(e.line, "field '" + key + "': invalid unsigned 64-bit integer '" + e.value + "'");
    return *v;
  }

  /// Comma-separated list of integers.
  [[nodiscard]] std::vector<std::int64_t> integer_list(const std::string& key) const {
    const auto& e = entry(key);
    std::vector<std::int64_t> out;
    std::size_t start = 0;
    while (start <= e.value.size()) {
      const auto comma = e.value.find(',', start);
      const auto item = trim(std::string_view(e.value).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      const auto v = parse_int(item);
      if (!v) fail(e.line, "field '" + key + "': invalid integer '" + item + "'");
      out.push_back(*v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return out;
  }

  /// Rejects any key not in `allowed` (given as "section.key").
  void check_keys(const std::set<std::string>& allowed) const {
    for (const auto& [key, e] : entries_)
      if (allowed.count(key) == 0) fail(e.line, "unknown field '" + key + "'");
  }

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw ValidationError(source_ + ":" + std::to_string(line) + ": " + msg);
  }

  [[noreturn]] void missing(const std::string& key) const {
    throw ValidationError(source_ + ": missing required field '" + key + "'");
  }

  [[nodiscard]] int line_of(const std::string& key) const { return has(key) ? entry(key).line : 0; }

 private:
  [[nodiscard]] const Entry& entry(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) missing(key);
    return it->second;
  }

  std::string source_;
  std::map<std::string, Entry> entries_;
  std::set<std::string> sections_;
};

}  // namespace cmekit::io

#include "sdepca/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "sdepca/errors.hpp"
#include "sdepca/report.hpp"

namespace sdepca {

namespace {

// Nested bracket lists of numbers.
struct Node {
  bool is_list = false;
  double number = 0.0;
  std::vector<Node> items;
};

class ListParser {
 public:
  explicit ListParser(std::string_view text) : text_(text) {}

  Node parse() {
    Node n = value();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters");
    return n;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError(what + " at column " + std::to_string(pos_ + 1) + " of '" + std::string(text_) + "'");
  }
  Node value() {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == '[') {
      ++pos_;
      Node list;
      list.is_list = true;
      skip_ws();
      if (pos_ < text_.size() && text_[pos_] == ']') {
        ++pos_;
        return list;
      }
      while (true) {
        list.items.push_back(value());
        skip_ws();
        if (pos_ >= text_.size()) fail("unterminated list");
        if (text_[pos_] == ']') {
          ++pos_;
          return list;
        }
        if (text_[pos_] != ',') fail("expected ',' or ']'");
        ++pos_;
      }
    }
    Node n;
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    if (begin < end && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, n.number);
    if (ec != std::errc()) fail("expected a number");
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    return n;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view s) {
  Node n = ListParser(s).parse();
  if (n.is_list) throw ValidationError("expected a number, got '" + std::string(s) + "'");
  return n.number;
}

template <typename Int>
Int parse_int(std::string_view s) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError("expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

bool parse_bool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ValidationError("expected true or false, got '" + std::string(s) + "'");
}

std::optional<double> parse_optional(std::string_view s) {
  if (s == "none") return std::nullopt;
  return parse_double(s);
}

std::vector<double> to_numbers(const Node& n, std::string_view what) {
  if (!n.is_list) throw ValidationError(std::string(what) + " must be a bracketed list");
  std::vector<double> out;
  for (const auto& item : n.items) {
    if (item.is_list) throw ValidationError(std::string(what) + " must be a flat list of numbers");
    out.push_back(item.number);
  }
  return out;
}

Eigen::MatrixXd to_matrix(const Node& n, std::string_view what) {
  if (!n.is_list || n.items.empty()) throw ValidationError(std::string(what) + " must be a nonempty list of rows");
  std::vector<std::vector<double>> rows;
  for (const auto& r : n.items) rows.push_back(to_numbers(r, what));
  const auto cols = rows.front().size();
  if (cols == 0) throw ValidationError(std::string(what) + " has an empty row");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw ShapeError(std::string(what) + " has rows of different lengths");
    for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return m;
}

std::vector<Eigen::MatrixXd> to_matrices(const Node& n, std::string_view what) {
  if (!n.is_list || n.items.empty()) throw ValidationError(std::string(what) + " must be a nonempty list of matrices");
  std::vector<Eigen::MatrixXd> out;
  for (const auto& m : n.items) out.push_back(to_matrix(m, what));
  return out;
}

CatalogueMap<double> parse_map(std::string_view s) {
  const auto space = s.find_first_of(" \t");
  if (space == std::string_view::npos) throw ValidationError("catalogue map must read '<sin|tanh> <scale>'");
  return {parse_catalogue_shape(s.substr(0, space)), parse_double(trim(s.substr(space)))};
}

template <typename T, typename Parse>
std::vector<T> parse_name_list(std::string_view s, Parse parse) {
  std::vector<T> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    out.push_back(parse(trim(s.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    s = s.substr(comma + 1);
  }
  if (out.empty()) throw ValidationError("empty list");
  return out;
}

std::string num(double x) { return format_number(x); }

std::string list_text(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += num(v[i]);
  }
  return s + "]";
}

std::string matrix_text(const Eigen::MatrixXd& m) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i) s += ", ";
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    s += list_text(row);
  }
  return s + "]";
}

std::string matrices_text(const std::vector<Eigen::MatrixXd>& ms) {
  std::string s = "[";
  for (std::size_t i = 0; i < ms.size(); ++i) {
    if (i) s += ", ";
    s += matrix_text(ms[i]);
  }
  return s + "]";
}

std::string map_text(const CatalogueMap<double>& m) {
  return std::string(to_string(m.shape)) + " " + num(m.scale);
}

std::string optional_text(const std::optional<double>& x) { return x ? num(*x) : "none"; }

void apply(ExperimentConfig& c, const std::string& section, const std::string& key, std::string_view v) {
  auto node = [&] { return ListParser(v).parse(); };
  if (section.empty()) {
    if (key == "command") return void(c.command = parse_command(v));
  } else if (section == "system") {
    auto& s = c.system;
    if (key == "kind") {
      if (v == "linear") return void(s.kind = SystemKind::linear);
      if (v == "scalar-nonlinear") return void(s.kind = SystemKind::scalar_nonlinear);
      throw ValidationError("system kind must be linear or scalar-nonlinear");
    }
    if (key == "A") return void(s.A = to_matrix(node(), "A"));
    if (key == "C") return void(s.C = to_matrix(node(), "C"));
    if (key == "B") return void(s.B = to_matrices(node(), "B"));
    if (key == "D") return void(s.D = to_matrices(node(), "D"));
    if (key == "f") return void(s.f = parse_map(v));
    if (key == "g") return void(s.g = parse_map(v));
    if (key == "u1") return void(s.u1 = parse_map(v));
    if (key == "u2") return void(s.u2 = parse_map(v));
  } else if (section == "grid") {
    if (key == "tau") return void(c.grid.tau = parse_double(v));
    if (key == "m_sub") return void(c.grid.m_sub = parse_int<std::int64_t>(v));
    if (key == "horizon") return void(c.grid.horizon = parse_double(v));
  } else if (section == "mc") {
    if (key == "n_paths") return void(c.mc.n_paths = parse_int<std::int64_t>(v));
    if (key == "seed") return void(c.mc.seed = parse_int<std::uint64_t>(v));
    if (key == "p") return void(c.mc.p = parse_double(v));
    if (key == "schemes") return void(c.mc.schemes = parse_name_list<Scheme>(v, parse_scheme));
    if (key == "x0") return void(c.mc.x0 = v == "default" ? std::vector<double>{} : to_numbers(node(), "x0"));
    if (key == "dump_paths") return void(c.mc.dump_paths = parse_int<std::int64_t>(v));
    if (key == "fit") return void(c.mc.fit = parse_bool(v));
  } else if (section == "certificate") {
    auto& q = c.certificate;
    if (key == "kind") return void(q.kind = parse_certificate_kind(v));
    if (key == "delta") return void(q.delta = parse_double(v));
    if (key == "delta_search") return void(q.delta_search = parse_bool(v));
    if (key == "assumed_M") return void(q.assumed_M = parse_optional(v));
    if (key == "assumed_gamma") return void(q.assumed_gamma = parse_optional(v));
    if (key == "K") return void(q.K = parse_optional(v));
  } else if (section == "threshold") {
    if (key == "kinds") {
      return void(c.threshold.kinds = parse_name_list<CertificateKind>(v, parse_certificate_kind));
    }
    if (key == "p_values") return void(c.threshold.p_values = to_numbers(node(), "p_values"));
  } else if (section == "convergence") {
    if (key == "coarsest_level") return void(c.convergence.coarsest_level = parse_int<int>(v));
    if (key == "finest_level") return void(c.convergence.finest_level = parse_int<int>(v));
  } else if (section == "lyapunov") {
    if (key == "resolution") return void(c.lyapunov.resolution = parse_int<int>(v));
    if (key == "random_probes") return void(c.lyapunov.random_probes = parse_int<std::int64_t>(v));
    if (key == "seed") return void(c.lyapunov.seed = parse_int<std::uint64_t>(v));
  } else if (section == "output") {
    if (key == "dir") return void(c.output.dir = std::string(v));
  } else {
    throw ValidationError("unknown section [" + section + "]");
  }
  throw ValidationError("unknown key '" + key + "'" + (section.empty() ? "" : " in [" + section + "]"));
}

}  // namespace

std::string_view to_string(Command c) {
  switch (c) {
    case Command::simulate: return "simulate";
    case Command::certify: return "certify";
    case Command::threshold: return "threshold";
    case Command::convergence: return "convergence";
    case Command::lyapunov: return "lyapunov";
    case Command::chain: return "chain";
  }
  return "?";
}

Command parse_command(std::string_view name) {
  for (auto c : {Command::simulate, Command::certify, Command::threshold, Command::convergence, Command::lyapunov,
                 Command::chain}) {
    if (name == to_string(c)) return c;
  }
  throw ValidationError("unknown command '" + std::string(name) + "'");
}

System SystemConfig::build() const {
  if (kind == SystemKind::scalar_nonlinear) return make_scalar_nonlinear_system<double>(f, g, u1, u2);
  return make_linear_system<double>(A, B, C, D);
}

Eigen::VectorXd ExperimentConfig::initial_state(Eigen::Index d) const {
  if (mc.x0.empty()) return Eigen::VectorXd::Ones(d);
  if (static_cast<Eigen::Index>(mc.x0.size()) != d) throw ShapeError("x0 must have length d");
  return Eigen::Map<const Eigen::VectorXd>(mc.x0.data(), d);
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  std::string section;
  std::map<std::string, int> seen;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ValidationError(where + "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ValidationError(where + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (seen[section + "." + key]++) throw ValidationError(where + "duplicate key '" + key + "'");
    try {
      apply(c, section, key, value);
    } catch (const ShapeError& e) {
      throw ShapeError(where + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot read config " + path.string());
  std::ostringstream buf;
  buf << file.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "command = " << to_string(c.command) << "\n";
  o << "\n[system]\n";
  if (c.system.kind == SystemKind::linear) {
    o << "kind = linear\n";
    o << "A = " << matrix_text(c.system.A) << "\n";
    o << "B = " << matrices_text(c.system.B) << "\n";
    o << "C = " << matrix_text(c.system.C) << "\n";
    o << "D = " << matrices_text(c.system.D) << "\n";
  } else {
    o << "kind = scalar-nonlinear\n";
    o << "f = " << map_text(c.system.f) << "\n";
    o << "g = " << map_text(c.system.g) << "\n";
    o << "u1 = " << map_text(c.system.u1) << "\n";
    o << "u2 = " << map_text(c.system.u2) << "\n";
  }
  o << "\n[grid]\n";
  o << "tau = " << num(c.grid.tau) << "\n";
  o << "m_sub = " << c.grid.m_sub << "\n";
  o << "horizon = " << num(c.grid.horizon) << "\n";
  o << "\n[mc]\n";
  o << "n_paths = " << c.mc.n_paths << "\n";
  o << "seed = " << c.mc.seed << "\n";
  o << "p = " << num(c.mc.p) << "\n";
  o << "schemes = ";
  for (std::size_t i = 0; i < c.mc.schemes.size(); ++i) o << (i ? ", " : "") << to_string(c.mc.schemes[i]);
  o << "\n";
  o << "x0 = " << (c.mc.x0.empty() ? std::string("default") : list_text(c.mc.x0)) << "\n";
  o << "dump_paths = " << c.mc.dump_paths << "\n";
  o << "fit = " << (c.mc.fit ? "true" : "false") << "\n";
  o << "\n[certificate]\n";
  o << "kind = " << to_string(c.certificate.kind) << "\n";
  o << "delta = " << num(c.certificate.delta) << "\n";
  o << "delta_search = " << (c.certificate.delta_search ? "true" : "false") << "\n";
  o << "assumed_M = " << optional_text(c.certificate.assumed_M) << "\n";
  o << "assumed_gamma = " << optional_text(c.certificate.assumed_gamma) << "\n";
  o << "K = " << optional_text(c.certificate.K) << "\n";
  o << "\n[threshold]\n";
  o << "kinds = ";
  for (std::size_t i = 0; i < c.threshold.kinds.size(); ++i) o << (i ? ", " : "") << to_string(c.threshold.kinds[i]);
  o << "\n";
  o << "p_values = " << list_text(c.threshold.p_values) << "\n";
  o << "\n[convergence]\n";
  o << "coarsest_level = " << c.convergence.coarsest_level << "\n";
  o << "finest_level = " << c.convergence.finest_level << "\n";
  o << "\n[lyapunov]\n";
  o << "resolution = " << c.lyapunov.resolution << "\n";
  o << "random_probes = " << c.lyapunov.random_probes << "\n";
  o << "seed = " << c.lyapunov.seed << "\n";
  o << "\n[output]\n";
  o << "dir = " << c.output.dir << "\n";
  return o.str();
}

void validate_config(const ExperimentConfig& c) {
  const System sys = c.system.build();
  GridSpec(c.grid.tau, c.grid.m_sub, c.grid.horizon);
  c.initial_state(sys.dim());
  if (c.mc.n_paths < 2) throw ValidationError("mc.n_paths must be at least 2");
  if (!(c.mc.p >= 2.0) || !std::isfinite(c.mc.p)) throw DomainError("mc.p must satisfy p >= 2");
  if (c.mc.schemes.empty()) throw ValidationError("mc.schemes is empty");
  if (c.mc.dump_paths < 0 || c.mc.dump_paths > c.mc.n_paths) {
    throw ValidationError("mc.dump_paths must lie in [0, n_paths]");
  }
  const auto& q = c.certificate;
  if (!(q.delta > 0.0 && q.delta < 1.0)) throw DomainError("certificate.delta must lie in (0, 1)");
  if (q.assumed_M.has_value() != q.assumed_gamma.has_value()) {
    throw ValidationError("certificate.assumed_M and assumed_gamma must be given together");
  }
  if (q.assumed_M && !(*q.assumed_M >= 1.0 && std::isfinite(*q.assumed_M))) {
    throw DomainError("certificate.assumed_M must be finite and >= 1");
  }
  if (q.assumed_gamma && !(*q.assumed_gamma > 0.0 && std::isfinite(*q.assumed_gamma))) {
    throw DomainError("certificate.assumed_gamma must be positive");
  }
  if (q.K && !(*q.K >= 0.0 && std::isfinite(*q.K))) throw DomainError("certificate.K must be nonnegative");
  if (q.kind == CertificateKind::LYAP) throw ValidationError("certificate.kind must be one of Q1..Q4");
  for (auto k : c.threshold.kinds) {
    if (k == CertificateKind::LYAP) throw ValidationError("threshold.kinds must be drawn from Q1..Q4");
  }
  for (double p : c.threshold.p_values) {
    if (!(p >= 2.0) || !std::isfinite(p)) throw DomainError("threshold.p_values must satisfy p >= 2");
  }
  const auto& v = c.convergence;
  if (v.coarsest_level < 0 || v.finest_level <= v.coarsest_level || v.finest_level > 20) {
    throw ValidationError("need 0 <= convergence.coarsest_level < finest_level <= 20");
  }
  if (c.lyapunov.resolution < 2) throw ValidationError("lyapunov.resolution must be at least 2");
  if (c.lyapunov.random_probes < 0) throw ValidationError("lyapunov.random_probes must be nonnegative");
  if (c.output.dir.empty()) throw ValidationError("output.dir is empty");
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sdepca

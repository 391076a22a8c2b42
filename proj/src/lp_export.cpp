#include "pmp/lp_export.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "pmp/errors.hpp"
#include "pmp/specialized.hpp"

namespace pmp {

namespace {

std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const char* sense_text(Sense s) {
  switch (s) {
    case Sense::Le:
      return "<=";
    case Sense::Ge:
      return ">=";
    case Sense::Eq:
      return "=";
  }
  return "=";
}

// Appends " + c name" terms, wrapping long expressions onto indented lines.
void write_terms(std::string& out, const LinearProgram& lp, const std::vector<std::pair<std::size_t, double>>& terms) {
  std::size_t line = 0;
  for (const auto& [var, coef] : terms) {
    std::string term = coef < 0 ? " - " + format_number(-coef) : " + " + format_number(coef);
    term += " " + lp.names[var];
    if (line + term.size() > 200) {
      out += "\n  ";
      line = 0;
    }
    out += term;
    line += term.size();
  }
}

void check_ising_inputs(std::span<const double> W, std::span<const double> b) {
  const std::size_t n = b.size();
  check_ising_weights(W, n);
}

void check_rbm_inputs(std::span<const double> W, std::span<const double> b, std::span<const double> c) {
  if (W.size() != b.size() * c.size()) throw StructuralError("RBM weight matrix must be n_hidden x n_visible");
}

// Shared body of the two reduced constructions: `first` and `second` are the
// unary variables joined by pair variable `pair`.
void add_pair_rows(LinearProgram& lp, std::size_t first, std::size_t second, std::size_t pair) {
  const auto& name = lp.names[pair];
  lp.add_row(name + "_le_a", {{pair, 1.0}, {first, -1.0}}, Sense::Le, 0.0);
  lp.add_row(name + "_le_b", {{pair, 1.0}, {second, -1.0}}, Sense::Le, 0.0);
  lp.add_row(name + "_ge", {{first, 1.0}, {second, 1.0}, {pair, -1.0}}, Sense::Le, 1.0);
}

// Standard-LP block for one unary variable: p(0), p(1) with p(0) + p(1) = 1.
std::size_t add_unary_block(LinearProgram& lp, const std::string& name, double score) {
  const auto p0 = lp.add_variable(name + "_0", 0.0, 0.0);
  lp.add_variable(name + "_1", score, 0.0);
  lp.add_row("norm_" + name, {{p0, 1.0}, {p0 + 1, 1.0}}, Sense::Eq, 1.0);
  return p0;
}

// Standard-LP block for one pair: q(00), q(01), q(10), q(11) marginalizing to
// the unary blocks starting at pa and pb.
void add_pair_block(LinearProgram& lp, const std::string& name, double weight, std::size_t pa, std::size_t pb) {
  const auto q = lp.add_variable(name + "_00", 0.0, 0.0);
  lp.add_variable(name + "_01", 0.0, 0.0);
  lp.add_variable(name + "_10", 0.0, 0.0);
  lp.add_variable(name + "_11", weight, 0.0);
  for (std::size_t a = 0; a < 2; ++a)
    lp.add_row(name + "_ma" + std::to_string(a), {{q + 2 * a, 1.0}, {q + 2 * a + 1, 1.0}, {pa + a, -1.0}}, Sense::Eq,
               0.0);
  for (std::size_t c = 0; c < 2; ++c)
    lp.add_row(name + "_mb" + std::to_string(c), {{q + c, 1.0}, {q + 2 + c, 1.0}, {pb + c, -1.0}}, Sense::Eq, 0.0);
}

void push_pair_values(std::vector<double>& out, double pa, double pb, double q) {
  out.push_back(1.0 - pa - pb + q);
  out.push_back(pb - q);
  out.push_back(pa - q);
  out.push_back(q);
}

}  // namespace

std::size_t LinearProgram::add_variable(std::string name, double cost, double lo, double hi) {
  names.push_back(std::move(name));
  objective.push_back(cost);
  lower.push_back(lo);
  upper.push_back(hi);
  return names.size() - 1;
}

void LinearProgram::add_row(std::string name, std::vector<std::pair<std::size_t, double>> coeffs, Sense sense,
                            double rhs) {
  rows.push_back({std::move(name), std::move(coeffs), sense, rhs});
}

double LinearProgram::objective_value(std::span<const double> x) const {
  if (x.size() != num_variables()) throw StructuralError("point dimension does not match the LP");
  double v = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) v += objective[k] * x[k];
  return v;
}

long LinearProgram::first_violation(std::span<const double> x, double tol) const {
  if (x.size() != num_variables()) throw StructuralError("point dimension does not match the LP");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double lhs = 0.0;
    for (const auto& [var, coef] : rows[r].coeffs) lhs += coef * x[var];
    const double d = lhs - rows[r].rhs;
    const bool ok = rows[r].sense == Sense::Le ? d <= tol : (rows[r].sense == Sense::Ge ? d >= -tol : std::abs(d) <= tol);
    if (!ok) return static_cast<long>(r);
  }
  for (std::size_t k = 0; k < x.size(); ++k)
    if (x[k] < lower[k] - tol || x[k] > upper[k] + tol) return static_cast<long>(rows.size() + k);
  return -1;
}

void LinearProgram::check_feasible(std::span<const double> x, double tol) const {
  const long bad = first_violation(x, tol);
  if (bad < 0) return;
  const auto r = static_cast<std::size_t>(bad);
  const std::string what = r < rows.size() ? "constraint " + rows[r].name : "bound of " + names[r - rows.size()];
  throw ValidationError("point violates " + what, bad);
}

void LinearProgram::validate() const {
  const std::size_t n = names.size();
  if (objective.size() != n || lower.size() != n || upper.size() != n)
    throw StructuralError("LP variable arrays differ in length");
  std::unordered_set<std::string> seen;
  for (const auto& name : names)
    if (!seen.insert(name).second) throw StructuralError("duplicate LP variable name " + name);
  for (const auto& row : rows) {
    if (!seen.insert(row.name).second) throw StructuralError("duplicate LP name " + row.name);
    for (const auto& term : row.coeffs)
      if (term.first >= n) throw StructuralError("LP row " + row.name + " references an unknown variable");
  }
}

LinearProgram reduced_lp_ising(std::span<const double> W, std::span<const double> b, bool halved) {
  check_ising_inputs(W, b);
  const std::size_t n = b.size();
  LinearProgram lp;
  for (std::size_t i = 0; i < n; ++i) lp.add_variable("p_" + std::to_string(i), b[i]);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || (halved && j < i)) continue;
      const double w = halved ? 2.0 * W[i * n + j] : W[i * n + j];
      lp.add_variable("q_" + std::to_string(i) + "_" + std::to_string(j), w);
      pairs.emplace_back(i, j);
    }
  for (std::size_t k = 0; k < pairs.size(); ++k) add_pair_rows(lp, pairs[k].first, pairs[k].second, n + k);
  for (std::size_t i = 0; i < n; ++i) lp.add_row("p_" + std::to_string(i) + "_le1", {{i, 1.0}}, Sense::Le, 1.0);
  for (std::size_t k = 0; k < pairs.size(); ++k) lp.add_row(lp.names[n + k] + "_nonneg", {{n + k, 1.0}}, Sense::Ge, 0.0);
  return lp;
}

LinearProgram reduced_lp_rbm(std::span<const double> W, std::span<const double> b, std::span<const double> c) {
  check_rbm_inputs(W, b, c);
  const std::size_t m = b.size();
  const std::size_t n = c.size();
  LinearProgram lp;
  for (std::size_t i = 0; i < m; ++i) lp.add_variable("h_" + std::to_string(i), b[i]);
  for (std::size_t j = 0; j < n; ++j) lp.add_variable("v_" + std::to_string(j), c[j]);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) lp.add_variable("z_" + std::to_string(i) + "_" + std::to_string(j), W[i * n + j]);
  const std::size_t z0 = m + n;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) add_pair_rows(lp, i, m + j, z0 + i * n + j);
  for (std::size_t k = 0; k < m + n; ++k) lp.add_row(lp.names[k] + "_le1", {{k, 1.0}}, Sense::Le, 1.0);
  for (std::size_t k = 0; k < m * n; ++k) lp.add_row(lp.names[z0 + k] + "_nonneg", {{z0 + k, 1.0}}, Sense::Ge, 0.0);
  return lp;
}

LinearProgram standard_lp_ising(std::span<const double> W, std::span<const double> b) {
  check_ising_inputs(W, b);
  const std::size_t n = b.size();
  LinearProgram lp;
  for (std::size_t i = 0; i < n; ++i) add_unary_block(lp, "p" + std::to_string(i), b[i]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) add_pair_block(lp, "q" + std::to_string(i) + "_" + std::to_string(j), W[i * n + j], 2 * i, 2 * j);
  return lp;
}

LinearProgram standard_lp_rbm(std::span<const double> W, std::span<const double> b, std::span<const double> c) {
  check_rbm_inputs(W, b, c);
  const std::size_t m = b.size();
  const std::size_t n = c.size();
  LinearProgram lp;
  for (std::size_t i = 0; i < m; ++i) add_unary_block(lp, "h" + std::to_string(i), b[i]);
  for (std::size_t j = 0; j < n; ++j) add_unary_block(lp, "v" + std::to_string(j), c[j]);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      add_pair_block(lp, "z" + std::to_string(i) + "_" + std::to_string(j), W[i * n + j], 2 * i, 2 * (m + j));
  return lp;
}

std::vector<double> map_reduced_to_full(std::span<const double> reduced, std::size_t n) {
  const std::vector<double> zeros_w(n * n, 0.0), zeros_b(n, 0.0);
  const auto lp = reduced_lp_ising(zeros_w, zeros_b);
  if (reduced.size() != lp.num_variables()) throw StructuralError("reduced point has the wrong dimension");
  lp.check_feasible(reduced);
  std::vector<double> out;
  out.reserve(2 * n + 4 * n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(1.0 - reduced[i]);
    out.push_back(reduced[i]);
  }
  std::size_t k = n;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) push_pair_values(out, reduced[i], reduced[j], reduced[k++]);
  return out;
}

std::vector<double> map_reduced_to_full_rbm(std::span<const double> reduced, std::size_t n_hidden,
                                            std::size_t n_visible) {
  const std::size_t m = n_hidden;
  const std::size_t n = n_visible;
  const std::vector<double> zw(m * n, 0.0), zb(m, 0.0), zc(n, 0.0);
  const auto lp = reduced_lp_rbm(zw, zb, zc);
  if (reduced.size() != lp.num_variables()) throw StructuralError("reduced point has the wrong dimension");
  lp.check_feasible(reduced);
  std::vector<double> out;
  out.reserve(2 * (m + n) + 4 * m * n);
  for (std::size_t k = 0; k < m + n; ++k) {
    out.push_back(1.0 - reduced[k]);
    out.push_back(reduced[k]);
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) push_pair_values(out, reduced[i], reduced[m + j], reduced[m + n + i * n + j]);
  return out;
}

std::string serialize_lp(const LinearProgram& lp) {
  lp.validate();
  std::string out = "\\ binary MAP relaxation\n";
  out += lp.maximize ? "Maximize\n" : "Minimize\n";
  out += " obj:";
  std::vector<std::pair<std::size_t, double>> terms;
  for (std::size_t k = 0; k < lp.num_variables(); ++k) terms.emplace_back(k, lp.objective[k]);
  write_terms(out, lp, terms);
  out += "\nSubject To\n";
  for (const auto& row : lp.rows) {
    out += " " + row.name + ":";
    write_terms(out, lp, row.coeffs);
    out += " ";
    out += sense_text(row.sense);
    out += " " + format_number(row.rhs) + "\n";
  }
  out += "Bounds\n";
  for (std::size_t k = 0; k < lp.num_variables(); ++k) {
    if (std::isinf(lp.lower[k]) && lp.lower[k] < 0 && std::isinf(lp.upper[k]) && lp.upper[k] > 0)
      out += " " + lp.names[k] + " free\n";
    else
      out += " " + format_number(lp.lower[k]) + " <= " + lp.names[k] + " <= " + format_number(lp.upper[k]) + "\n";
  }
  out += "End\n";
  return out;
}

namespace {

struct Token {
  std::string_view text;
  std::size_t offset;
  std::size_t line;
};

class LpParser {
 public:
  explicit LpParser(std::string_view text) : text_(text) { tokenize(); }

  LinearProgram parse() {
    LinearProgram lp;
    enum class Section { None, Objective, Constraints, Bounds, End } section = Section::None;
    std::size_t k = 0;
    while (k < tokens_.size()) {
      const auto word = lower(tokens_[k].text);
      if (word == "maximize" || word == "minimize" || word == "maximise" || word == "minimise") {
        lp.maximize = word.starts_with("max");
        section = Section::Objective;
        ++k;
        if (k < tokens_.size() && tokens_[k].text.ends_with(':')) ++k;
        k = parse_expression(lp, k, &objective_terms_);
        continue;
      }
      if (word == "subject" && k + 1 < tokens_.size() && lower(tokens_[k + 1].text) == "to") {
        section = Section::Constraints;
        k += 2;
        continue;
      }
      if (word == "st" || word == "s.t." || word == "such") {
        section = Section::Constraints;
        k += (word == "such") ? 2 : 1;
        continue;
      }
      if (word == "bounds") {
        section = Section::Bounds;
        ++k;
        continue;
      }
      if (word == "end") {
        section = Section::End;
        ++k;
        break;
      }
      if (section == Section::Constraints) {
        k = parse_row(lp, k);
      } else if (section == Section::Bounds) {
        k = parse_bound(lp, k);
      } else {
        fail("unexpected token '" + std::string(tokens_[k].text) + "'", k);
      }
    }
    if (section != Section::End && !tokens_.empty()) fail("missing End section", tokens_.size());
    for (const auto& [var, coef] : objective_terms_) lp.objective[var] += coef;
    return lp;
  }

 private:
  static std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
  }

  [[noreturn]] void fail(const std::string& what, std::size_t k) const {
    const std::size_t offset = k < tokens_.size() ? tokens_[k].offset : text_.size();
    throw ParseError(what, offset);
  }

  void tokenize() {
    std::size_t i = 0;
    std::size_t line = 0;
    while (i < text_.size()) {
      const char ch = text_[i];
      if (ch == '\\') {
        while (i < text_.size() && text_[i] != '\n') ++i;
        continue;
      }
      if (ch == '\n') {
        ++line;
        ++i;
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        ++i;
        continue;
      }
      const std::size_t start = i;
      if (ch == '<' || ch == '>' || ch == '=') {
        ++i;
        if (i < text_.size() && text_[i] == '=') ++i;
      } else {
        while (i < text_.size() && !std::isspace(static_cast<unsigned char>(text_[i])) && text_[i] != '<' &&
               text_[i] != '>' && text_[i] != '=')
          ++i;
      }
      tokens_.push_back({text_.substr(start, i - start), start, line});
    }
  }

  bool is_section_word(std::size_t k) const {
    const auto w = lower(tokens_[k].text);
    return w == "subject" || w == "st" || w == "s.t." || w == "such" || w == "bounds" || w == "end" ||
           w == "maximize" || w == "minimize" || w == "maximise" || w == "minimise";
  }

  static bool is_sense(std::string_view t) {
    return t == "<=" || t == ">=" || t == "=" || t == "<" || t == ">" || t == "=<" || t == "=>";
  }

  bool parse_number(std::string_view t, double& out) const {
    const auto w = lower(t);
    if (w == "inf" || w == "+inf" || w == "infinity" || w == "+infinity") return out = kLpInfinity, true;
    if (w == "-inf" || w == "-infinity") return out = -kLpInfinity, true;
    const char* b = t.data();
    const char* e = t.data() + t.size();
    if (b != e && *b == '+') ++b;
    const auto res = std::from_chars(b, e, out);
    return res.ec == std::errc() && res.ptr == e;
  }

  std::size_t variable(LinearProgram& lp, std::string_view name) {
    const auto it = index_.find(std::string(name));
    if (it != index_.end()) return it->second;
    const auto k = lp.add_variable(std::string(name), 0.0, 0.0, kLpInfinity);
    index_.emplace(std::string(name), k);
    return k;
  }

  // Reads "[+|-] [coef] name" terms until a sense, a label or a section word.
  std::size_t parse_expression(LinearProgram& lp, std::size_t k, std::vector<std::pair<std::size_t, double>>* terms) {
    while (k < tokens_.size()) {
      const auto t = tokens_[k].text;
      if (is_sense(t) || t.ends_with(':') || is_section_word(k)) break;
      double sign = 1.0;
      if (t == "+" || t == "-") {
        sign = t == "-" ? -1.0 : 1.0;
        if (++k >= tokens_.size()) fail("expression ends after a sign", k);
      }
      double coef = 1.0;
      double value;
      if (parse_number(tokens_[k].text, value)) {
        coef = value;
        if (++k >= tokens_.size()) fail("coefficient without a variable", k);
      }
      const auto name = tokens_[k].text;
      if (is_sense(name) || name.ends_with(':') || parse_number(name, value))
        fail("expected a variable name", k);
      terms->emplace_back(variable(lp, name), sign * coef);
      ++k;
    }
    return k;
  }

  std::size_t parse_row(LinearProgram& lp, std::size_t k) {
    LpRow row;
    if (tokens_[k].text.ends_with(':')) {
      row.name = std::string(tokens_[k].text.substr(0, tokens_[k].text.size() - 1));
      ++k;
    } else {
      row.name = "r" + std::to_string(lp.rows.size());
    }
    k = parse_expression(lp, k, &row.coeffs);
    if (k >= tokens_.size() || !is_sense(tokens_[k].text)) fail("constraint " + row.name + " lacks a sense", k);
    const auto s = tokens_[k].text;
    row.sense = (s[0] == '<' || s == "=<") ? Sense::Le : ((s[0] == '>' || s == "=>") ? Sense::Ge : Sense::Eq);
    if (++k >= tokens_.size() || !parse_number(tokens_[k].text, row.rhs))
      fail("constraint " + row.name + " lacks a right-hand side", k);
    lp.rows.push_back(std::move(row));
    return k + 1;
  }

  std::size_t parse_bound(LinearProgram& lp, std::size_t k) {
    // Forms: "x free", "lo <= x <= hi", "x >= lo", "x <= hi", "lo <= x", "x = v".
    const std::size_t line = tokens_[k].line;
    std::vector<std::size_t> idx;
    while (k < tokens_.size() && tokens_[k].line == line && !is_section_word(k)) idx.push_back(k++);
    auto tok = [&](std::size_t q) { return tokens_[idx[q]].text; };
    double value;
    if (idx.size() == 2 && lower(tok(1)) == "free") {
      const auto v = variable(lp, tok(0));
      lp.lower[v] = -kLpInfinity;
      lp.upper[v] = kLpInfinity;
      return k;
    }
    double hi;
    if (idx.size() == 5 && parse_number(tok(0), value) && parse_number(tok(4), hi) && is_sense(tok(1)) &&
        is_sense(tok(3))) {
      const auto v = variable(lp, tok(2));
      lp.lower[v] = value;
      lp.upper[v] = hi;
      return k;
    }
    if (idx.size() == 3 && is_sense(tok(1))) {
      const bool number_first = parse_number(tok(0), value);
      const auto name = number_first ? tok(2) : tok(0);
      if (!number_first && !parse_number(tok(2), value)) fail("malformed bound", idx[0]);
      const auto v = variable(lp, name);
      const char s = tok(1)[0];
      const bool is_lower = (s == '>') != number_first;
      if (tok(1) == "=") {
        lp.lower[v] = lp.upper[v] = value;
      } else if (is_lower) {
        lp.lower[v] = value;
      } else {
        lp.upper[v] = value;
      }
      return k;
    }
    fail("malformed bound", idx.empty() ? k : idx[0]);
  }

  std::string_view text_;
  std::vector<Token> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::pair<std::size_t, double>> objective_terms_;
};

}  // namespace

LinearProgram parse_lp(std::string_view text) { return LpParser(text).parse(); }

}  // namespace pmp

#include "cpn/mechanism.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "cpn/error.hpp"

namespace cpn {

namespace {

constexpr std::string_view kSpeciesKeyword = "species";

bool is_alpha(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

// Cursor over one source line. Columns are 1-based byte offsets.
class LineParser {
 public:
  LineParser(std::string_view line, std::size_t line_no) : text_(line), line_no_(line_no) {}

  [[noreturn]] void fail(ErrorKind kind, std::size_t col, const std::string& message) const {
    throw ParseError(kind, line_no_, col, message);
  }
  [[noreturn]] void fail(const std::string& message) const {
    fail(ErrorKind::SyntaxError, column(), message);
  }

  std::size_t column() const { return pos_ + 1; }

  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  bool at_end() {
    skip_space();
    return pos_ >= text_.size() || text_[pos_] == '#';
  }

  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  bool consume(std::string_view token) {
    skip_space();
    if (text_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view token) {
    if (!consume(token)) {
      if (at_end()) fail("expected '" + std::string(token) + "' before end of line");
      fail("expected '" + std::string(token) + "', found '" + std::string(1, text_[pos_]) + "'");
    }
  }

  // [A-Za-z][A-Za-z0-9_+-]*, stopping before "->".
  std::optional<std::string> name() {
    skip_space();
    if (pos_ >= text_.size() || !is_alpha(text_[pos_])) return std::nullopt;
    const std::size_t start = pos_++;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '-' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '>') break;
      if (!(is_alpha(c) || is_digit(c) || c == '_' || c == '+' || c == '-')) break;
      ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  std::optional<std::string> identifier() {
    skip_space();
    if (pos_ >= text_.size() || !is_alpha(text_[pos_])) return std::nullopt;
    const std::size_t start = pos_++;
    while (pos_ < text_.size() && (is_alpha(text_[pos_]) || is_digit(text_[pos_]) || text_[pos_] == '_')) {
      ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  double number(const char* what) {
    skip_space();
    const std::size_t start = pos_;
    std::size_t end = pos_;
    if (end < text_.size() && (text_[end] == '+' || text_[end] == '-')) ++end;
    while (end < text_.size()) {
      const char c = text_[end];
      if (is_digit(c) || c == '.') {
        ++end;
      } else if ((c == 'e' || c == 'E') && end + 1 < text_.size()) {
        ++end;
        if (text_[end] == '+' || text_[end] == '-') ++end;
      } else {
        break;
      }
    }
    const std::string_view token = text_.substr(start, end - start);
    if (token.empty()) fail(std::string("expected a number for ") + what);
    std::string_view digits = token;
    if (digits.front() == '+') digits.remove_prefix(1);
    double value = 0.0;
    const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (res.ec != std::errc() || res.ptr != digits.data() + digits.size() || !std::isfinite(value)) {
      fail(ErrorKind::SyntaxError, start + 1,
           "malformed number '" + std::string(token) + "' for " + what);
    }
    pos_ = end;
    return value;
  }

  // Leading stoichiometric count; nullopt when the term starts with a name.
  std::optional<int> count() {
    skip_space();
    if (pos_ >= text_.size() || !is_digit(text_[pos_])) return std::nullopt;
    const std::size_t start = pos_;
    std::size_t end = pos_;
    while (end < text_.size() && is_digit(text_[end])) ++end;
    if (end < text_.size() && (text_[end] == '.' || text_[end] == 'e' || text_[end] == 'E')) {
      std::size_t stop = end + 1;
      while (stop < text_.size() && (is_digit(text_[stop]) || text_[stop] == '.')) ++stop;
      // "2e" could also be count 2 followed by species "e"; only a digit after it makes a float.
      const bool exponent = text_[end] != '.';
      if (!exponent || (end + 1 < text_.size() && is_digit(text_[end + 1]))) {
        fail(ErrorKind::NonIntegerCount, start + 1,
             "stoichiometric count '" + std::string(text_.substr(start, stop - start)) +
                 "' is not an integer");
      }
    }
    int value = 0;
    const auto res = std::from_chars(text_.data() + start, text_.data() + end, value);
    if (res.ec != std::errc() || value < 1) {
      fail(ErrorKind::NonIntegerCount, start + 1,
           "stoichiometric count '" + std::string(text_.substr(start, end - start)) +
               "' must be a positive integer");
    }
    pos_ = end;
    return value;
  }

  std::size_t pos() const { return pos_; }

 private:
  std::string_view text_;
  std::size_t line_no_;
  std::size_t pos_ = 0;
};

class Builder {
 public:
  explicit Builder(const ParseOptions& opts) : opts_(opts) {}

  void declare(LineParser& p, std::size_t col, const std::string& name,
               std::map<std::string, int> composition) {
    if (auto it = index_.find(name); it != index_.end()) {
      auto& existing = mech.species[it->second];
      const bool conflict = !existing.composition.empty() && !composition.empty() &&
                            existing.composition != composition;
      if (opts_.strict || conflict) {
        p.fail(ErrorKind::DuplicateSpecies, col, "species '" + name + "' declared twice");
      }
      if (existing.composition.empty()) existing.composition = std::move(composition);
      return;
    }
    index_.emplace(name, mech.species.size());
    mech.species.push_back({name, std::move(composition), std::nullopt});
  }

  std::size_t use(LineParser& p, std::size_t col, const std::string& name) {
    if (auto it = index_.find(name); it != index_.end()) return it->second;
    if (opts_.strict) {
      p.fail(ErrorKind::UnknownSpecies, col, "species '" + name + "' used before declaration");
    }
    index_.emplace(name, mech.species.size());
    mech.species.push_back({name, {}, std::nullopt});
    return mech.species.size() - 1;
  }

  std::optional<std::size_t> find(const std::string& name) const {
    if (auto it = index_.find(name); it != index_.end()) return it->second;
    return std::nullopt;
  }

  Mechanism mech;

 private:
  const ParseOptions& opts_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::string checked_name(LineParser& p, const char* what) {
  const std::size_t col = (p.skip_space(), p.column());
  auto name = p.name();
  if (!name) p.fail(std::string("expected ") + what);
  if (*name == kSpeciesKeyword) {
    p.fail(ErrorKind::SyntaxError, col, "'species' is reserved and cannot name a species");
  }
  return *name;
}

void parse_species_decl(LineParser& p, Builder& b) {
  do {
    p.skip_space();
    const std::size_t col = p.column();
    const std::string name = checked_name(p, "a species name");
    std::map<std::string, int> composition;
    if (p.consume("{")) {
      do {
        p.skip_space();
        const std::size_t ecol = p.column();
        auto element = p.identifier();
        if (!element) p.fail("expected an element symbol");
        p.expect(":");
        p.skip_space();
        const std::size_t ncol = p.column();
        auto n = p.count();
        if (!n) p.fail(ErrorKind::SyntaxError, ncol, "expected an element count");
        if (!composition.emplace(*element, *n).second) {
          p.fail(ErrorKind::SyntaxError, ecol, "element '" + *element + "' listed twice");
        }
      } while (p.consume(","));
      p.expect("}");
    }
    b.declare(p, col, name, std::move(composition));
  } while (p.consume(","));
  if (!p.at_end()) p.fail("unexpected text after species declaration");
}

std::vector<StoichTerm> parse_side(LineParser& p, Builder& b, const char* side) {
  std::vector<StoichTerm> terms;
  std::size_t plus_col = 0;
  while (true) {
    p.skip_space();
    const std::size_t col = p.column();
    const auto n = p.count();
    p.skip_space();
    const std::size_t name_col = p.column();
    auto name = p.name();
    if (!name) {
      if (plus_col != 0 && !n) {
        p.fail(ErrorKind::SyntaxError, plus_col, "dangling '+' without a following species");
      }
      p.fail(ErrorKind::SyntaxError, n ? name_col : col, std::string("expected a species on the ") + side + " side");
    }
    if (*name == kSpeciesKeyword) {
      p.fail(ErrorKind::SyntaxError, name_col, "'species' is reserved and cannot name a species");
    }
    const std::size_t idx = b.use(p, name_col, *name);
    auto it = std::find_if(terms.begin(), terms.end(), [&](const StoichTerm& t) { return t.species == idx; });
    if (it == terms.end()) {
      terms.push_back({idx, n.value_or(1)});
    } else {
      it->count += n.value_or(1);
    }
    p.skip_space();
    plus_col = p.column();
    if (!p.consume("+")) break;
  }
  return terms;
}

RateModel parse_rate(LineParser& p) {
  p.skip_space();
  const std::size_t col = p.column();
  auto form = p.identifier();
  if (!form) p.fail("expected a rate form such as const(k) or arrhenius(A=..., Ea=...)");
  if (*form == "const") {
    p.expect("(");
    const std::size_t vcol = (p.skip_space(), p.column());
    const double k = p.number("const rate");
    if (k < 0.0) p.fail(ErrorKind::InvalidValue, vcol, "rate constant must be >= 0");
    p.expect(")");
    return ConstantRate{k};
  }
  if (*form == "arrhenius") {
    p.expect("(");
    p.expect("A");
    p.expect("=");
    const std::size_t acol = (p.skip_space(), p.column());
    const double a = p.number("A");
    if (a < 0.0) p.fail(ErrorKind::InvalidValue, acol, "pre-exponential A must be >= 0");
    p.expect(",");
    p.expect("Ea");
    p.expect("=");
    const std::size_t ecol = (p.skip_space(), p.column());
    const double ea = p.number("Ea");
    if (ea < 0.0) p.fail(ErrorKind::InvalidValue, ecol, "activation energy Ea must be >= 0");
    p.expect(")");
    return ArrheniusRate{a, ea};
  }
  p.fail(ErrorKind::UnknownRateForm, col, "unknown rate form '" + *form + "'");
}

void parse_order(LineParser& p, Builder& b, Reaction& r) {
  p.expect("(");
  do {
    p.skip_space();
    const std::size_t col = p.column();
    const std::string name = checked_name(p, "a species name in order()");
    const auto idx = b.find(name);
    const bool reactant = idx && std::any_of(r.reactants.begin(), r.reactants.end(),
                                             [&](const StoichTerm& t) { return t.species == *idx; });
    if (!reactant) {
      p.fail(ErrorKind::UnknownSpecies, col, "order() names '" + name + "', which is not a reactant");
    }
    p.expect("=");
    const std::size_t vcol = (p.skip_space(), p.column());
    const double order = p.number("reaction order");
    if (order < 0.0) p.fail(ErrorKind::InvalidValue, vcol, "reaction order must be >= 0");
    if (!r.order_override.emplace(*idx, order).second) {
      p.fail(ErrorKind::SyntaxError, col, "order for '" + name + "' given twice");
    }
  } while (p.consume(","));
  p.expect(")");
}

void parse_reaction(LineParser& p, Builder& b, std::size_t line_no) {
  Reaction r;
  r.reactants = parse_side(p, b, "reactant");
  p.expect("->");
  r.products = parse_side(p, b, "product");
  p.expect(":");
  r.rate = parse_rate(p);
  if (!p.at_end()) {
    const std::size_t col = p.column();
    auto word = p.identifier();
    if (!word || *word != "order") p.fail(ErrorKind::SyntaxError, col, "unexpected text after rate clause");
    parse_order(p, b, r);
    if (!p.at_end()) p.fail("unexpected text after order clause");
  }
  b.mech.reactions.push_back(std::move(r));
  b.mech.reaction_lines.push_back(line_no);
}

bool starts_with_keyword(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && is_space(line[i])) ++i;
  if (line.substr(i, kSpeciesKeyword.size()) != kSpeciesKeyword) return false;
  const std::size_t after = i + kSpeciesKeyword.size();
  return after == line.size() || is_space(line[after]);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

void append_terms(std::string& out, std::span<const Species> species, const std::vector<StoichTerm>& terms) {
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i > 0) out += " + ";
    if (terms[i].count > 1) out += std::to_string(terms[i].count) + " ";
    out += species[terms[i].species].name;
  }
}

}  // namespace

ReactionNetwork Mechanism::network(TempMean mean) const {
  return ReactionNetwork(species, reactions, mean);
}

Mechanism parse_network(std::string_view text, const ParseOptions& opts) {
  Builder b(opts);
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    LineParser p(lines[i], line_no);
    for (std::size_t c = 0; c < lines[i].size(); ++c) {
      const auto byte = static_cast<unsigned char>(lines[i][c]);
      if (byte == 0 || (byte < 0x20 && !is_space(static_cast<char>(byte)))) {
        p.fail(ErrorKind::SyntaxError, c + 1, "control character in mechanism text");
      }
    }
    if (p.at_end()) continue;
    if (starts_with_keyword(lines[i])) {
      p.consume(kSpeciesKeyword);
      parse_species_decl(p, b);
    } else {
      parse_reaction(p, b, line_no);
    }
  }
  return std::move(b.mech);
}

std::string format_number(double value) {
  char buf[64];
  const double mag = std::abs(value);
  if (value == 0.0 || (mag >= 1e-3 && mag < 1e9)) {
    std::snprintf(buf, sizeof buf, "%.6f", value);
    double back = 0.0;
    std::from_chars(buf, buf + std::char_traits<char>::length(buf), back);
    if (back == value) return buf;
  }
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string serialize_network(std::span<const Species> species, std::span<const Reaction> reactions) {
  std::string out = "# cpn mechanism\n";
  if (!species.empty()) {
    out += "species ";
    for (std::size_t i = 0; i < species.size(); ++i) {
      if (i > 0) out += ", ";
      out += species[i].name;
      if (!species[i].composition.empty()) {
        out += " {";
        bool first = true;
        for (const auto& [element, count] : species[i].composition) {
          if (!first) out += ", ";
          first = false;
          out += element + ":" + std::to_string(count);
        }
        out += "}";
      }
    }
    out += "\n";
  }
  for (const auto& r : reactions) {
    append_terms(out, species, r.reactants);
    out += " -> ";
    append_terms(out, species, r.products);
    out += " : ";
    if (const auto* c = std::get_if<ConstantRate>(&r.rate)) {
      out += "const(" + format_number(c->k) + ")";
    } else {
      const auto& a = std::get<ArrheniusRate>(r.rate);
      out += "arrhenius(A=" + format_number(a.A) + ", Ea=" + format_number(a.Ea) + ")";
    }
    if (!r.order_override.empty()) {
      out += " order(";
      bool first = true;
      for (const auto& [sp, order] : r.order_override) {
        if (!first) out += ", ";
        first = false;
        out += species[sp].name + "=" + format_number(order);
      }
      out += ")";
    }
    out += "\n";
  }
  return out;
}

std::string serialize_network(const ReactionNetwork& net) {
  return serialize_network(net.species(), net.reactions());
}

std::string remove_species_lines(std::string_view text, std::string_view name) {
  std::string out;
  for (const auto full : split_lines(text)) {
    // Reaction lines only name species before the rate clause (order() repeats reactants).
    const std::string_view line = starts_with_keyword(full) ? full : full.substr(0, full.find(':'));
    bool mentions = false;
    std::size_t i = 0;
    while (i < line.size() && !mentions) {
      if (line[i] == '#') break;
      if (!is_alpha(line[i])) {
        ++i;
        continue;
      }
      const std::size_t start = i++;
      while (i < line.size()) {
        const char c = line[i];
        if (c == '-' && i + 1 < line.size() && line[i + 1] == '>') break;
        if (!(is_alpha(c) || is_digit(c) || c == '_' || c == '+' || c == '-')) break;
        ++i;
      }
      // Element symbols inside {...} are followed by ':' and are not species.
      std::size_t j = i;
      while (j < line.size() && is_space(line[j])) ++j;
      const bool element = j < line.size() && line[j] == ':';
      mentions = !element && line.substr(start, i - start) == name;
    }
    if (!mentions) {
      out.append(full);
      out += '\n';
    }
  }
  return out;
}

Mechanism load_mechanism(const std::string& path, const ParseOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Config, "cannot open mechanism file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_network(buf.str(), opts);
}

}  // namespace cpn

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "cep/veql.hpp"

namespace cep::veql {

std::string to_string(Comparator c) {
  switch (c) {
    case Comparator::Eq: return "=";
    case Comparator::Ne: return "!=";
    case Comparator::Lt: return "<";
    case Comparator::Gt: return ">";
    case Comparator::Le: return "<=";
    case Comparator::Ge: return ">=";
  }
  return "?";
}

namespace {

std::string format_error(const std::string& message, int line, int column,
                         const std::vector<std::string>& expected) {
  std::ostringstream os;
  if (line > 0) os << line << ":" << column << ": ";
  os << message;
  if (!expected.empty()) {
    os << " (expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) os << (i ? ", " : "") << expected[i];
    os << ")";
  }
  return os.str();
}

}  // namespace

QueryError::QueryError(Kind kind, const std::string& message, int line, int column,
                       std::vector<std::string> expected)
    : std::runtime_error(format_error(message, line, column, expected)),
      kind_(kind),
      line_(line),
      column_(column),
      expected_(std::move(expected)) {}

const CompositeRegistry& CompositeRegistry::builtin() {
  static const CompositeRegistry registry = [] {
    CompositeRegistry r;
    r.add("HIGH_TRAFFIC_FLOW", CompositeDefinition{});
    return r;
  }();
  return registry;
}

void CompositeRegistry::add(std::string name, CompositeDefinition def) {
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  defs_.insert_or_assign(std::move(name), def);
}

const CompositeDefinition* CompositeRegistry::find(std::string_view name) const {
  std::string key(name);
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  auto it = defs_.find(key);
  return it == defs_.end() ? nullptr : &it->second;
}

namespace {

enum class Tok { Ident, String, Number, LParen, RParen, Comma, Dot, Cmp, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0;
  Comparator cmp = Comparator::Eq;
  int line = 1;
  int column = 1;
};

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
           return std::toupper(x) == std::toupper(y);
         });
}

const std::vector<std::string_view> kReserved = {
    "SELECT", "FROM", "WHERE", "WITHIN", "WITH_CONFIDENCE", "AND", "OR",
    "COUNT",  "FOR",  "EACH",  "FRAME",  "TIMEFRAME_WINDOW"};

bool reserved(std::string_view word) {
  return std::any_of(kReserved.begin(), kReserved.end(),
                     [&](std::string_view k) { return iequals(k, word); });
}

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.column = col_;
      if (pos_ >= text_.size()) {
        out.push_back(t);
        return out;
      }
      const unsigned char c = static_cast<unsigned char>(text_[pos_]);
      if (std::isalpha(c) || c == '_') {
        std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
          advance();
        t.kind = Tok::Ident;
        t.text = std::string(text_.substr(start, pos_ - start));
      } else if (std::isdigit(c) || c == '-' || (c == '.' && next_is_digit())) {
        lex_number(t);
      } else if (c == '\'') {
        lex_string(t);
      } else if (c == '(') {
        t.kind = Tok::LParen, t.text = "(", advance();
      } else if (c == ')') {
        t.kind = Tok::RParen, t.text = ")", advance();
      } else if (c == ',') {
        t.kind = Tok::Comma, t.text = ",", advance();
      } else if (c == '.') {
        t.kind = Tok::Dot, t.text = ".", advance();
      } else if (!lex_comparator(t)) {
        throw QueryError(QueryError::Kind::Lexical,
                         "unexpected character '" + std::string(1, static_cast<char>(c)) + "'",
                         t.line, t.column);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance(std::size_t n = 1) {
    for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i) {
      const unsigned char c = static_cast<unsigned char>(text_[pos_++]);
      if (c == '\n') {
        ++line_;
        col_ = 1;
      } else if ((c & 0xC0) != 0x80) {
        ++col_;  // count code points, not bytes
      }
    }
  }

  bool next_is_digit() const {
    return pos_ + 1 < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) advance();
  }

  void lex_number(Token& t) {
    std::size_t start = pos_;
    if (text_[pos_] == '-') advance();
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
        advance(), ++n;
      return n;
    };
    std::size_t n = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      advance();
      n += digits();
    }
    if (n == 0)
      throw QueryError(QueryError::Kind::Lexical, "malformed number", t.line, t.column);
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      advance();
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) advance();
      if (digits() == 0)
        throw QueryError(QueryError::Kind::Lexical, "malformed exponent", t.line, t.column);
    }
    const std::string_view lexeme = text_.substr(start, pos_ - start);
    double value = 0;
    auto [ptr, ec] = std::from_chars(lexeme.data(), lexeme.data() + lexeme.size(), value);
    if (ec != std::errc() || ptr != lexeme.data() + lexeme.size())
      throw QueryError(QueryError::Kind::Lexical, "number out of range", t.line, t.column);
    t.kind = Tok::Number;
    t.text = std::string(lexeme);
    t.number = value;
  }

  void lex_string(Token& t) {
    advance();  // opening quote
    std::string value;
    for (;;) {
      if (pos_ >= text_.size())
        throw QueryError(QueryError::Kind::Lexical, "unterminated string literal", t.line,
                         t.column);
      char c = text_[pos_];
      if (c == '\'') {
        if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '\'') {
          value.push_back('\'');
          advance(2);
          continue;
        }
        advance();
        break;
      }
      value.push_back(c);
      advance();
    }
    t.kind = Tok::String;
    t.text = std::move(value);
  }

  bool lex_comparator(Token& t) {
    static const std::pair<std::string_view, Comparator> ops[] = {
        {"!=", Comparator::Ne}, {"<>", Comparator::Ne}, {"<=", Comparator::Le},
        {">=", Comparator::Ge}, {"≤", Comparator::Le}, {"≥", Comparator::Ge},
        {"≠", Comparator::Ne}, {"=", Comparator::Eq}, {"<", Comparator::Lt},
        {">", Comparator::Gt},
    };
    const std::string_view rest = text_.substr(pos_);
    for (const auto& [sym, cmp] : ops) {
      if (rest.starts_with(sym)) {
        t.kind = Tok::Cmp;
        t.text = std::string(sym);
        t.cmp = cmp;
        advance(sym.size());
        return true;
      }
    }
    return false;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

std::string describe_token(const Token& t) {
  switch (t.kind) {
    case Tok::End: return "end of input";
    case Tok::String: return "string '" + t.text + "'";
    default: return "'" + t.text + "'";
  }
}

class Parser {
 public:
  Parser(std::vector<Token> tokens, const CompositeRegistry& registry)
      : toks_(std::move(tokens)), registry_(registry) {}

  QueryAST parse_query() {
    QueryAST ast;
    expect_keyword("SELECT");
    ast.pattern = parse_pattern();
    expect_keyword("FROM");
    ast.producer = expect_ident("producer name");
    expect_keyword("WHERE");
    ast.conditions = parse_cond();
    expect_keyword("WITHIN");
    ast.window = parse_window();
    if (peek_keyword("WITH_CONFIDENCE")) {
      next();
      ast.confidence = parse_confidence();
    }
    if (peek().kind != Tok::End) fail("unexpected trailing input", {"end of input"});
    return ast;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }

  [[noreturn]] void fail(const std::string& what, std::vector<std::string> expected) const {
    const Token& t = peek();
    throw QueryError(QueryError::Kind::Syntax, what + ", found " + describe_token(t), t.line,
                     t.column, std::move(expected));
  }

  [[noreturn]] void semantic(const std::string& what, const Token& at) const {
    throw QueryError(QueryError::Kind::Semantic, what, at.line, at.column);
  }

  bool peek_keyword(std::string_view kw) const {
    return peek().kind == Tok::Ident && iequals(peek().text, kw);
  }

  void expect_keyword(std::string_view kw) {
    if (!peek_keyword(kw)) fail("expected " + std::string(kw), {std::string(kw)});
    next();
  }

  void expect(Tok kind, const char* what) {
    if (peek().kind != kind) fail(std::string("expected ") + what, {what});
    next();
  }

  std::string expect_ident(const char* what) {
    if (peek().kind != Tok::Ident || reserved(peek().text))
      fail(std::string("expected ") + what, {"identifier"});
    return next().text;
  }

  double expect_number(const char* what) {
    if (peek().kind != Tok::Number) fail(std::string("expected ") + what, {"number"});
    return next().number;
  }

  Comparator expect_cmp() {
    if (peek().kind != Tok::Cmp) fail("expected comparison operator", {"=", "!=", "<", ">", "<=", ">="});
    return next().cmp;
  }

  Pattern parse_pattern() {
    const Token name_tok = peek();
    Pattern p;
    const std::string name = expect_ident("pattern");
    if (peek().kind != Tok::LParen) {
      p.kind = Pattern::Kind::Object;
      p.args.push_back(name);
      return p;
    }
    next();
    p.function = upper(name);
    if (parse_spatial_relation(name)) {
      p.kind = Pattern::Kind::Spatial;
    } else if (p.function == "SEQ" || p.function == "EQ" || p.function == "CONJ" ||
               p.function == "DISJ") {
      p.kind = Pattern::Kind::Temporal;
    } else if (registry_.find(p.function)) {
      p.kind = Pattern::Kind::Composite;
    } else {
      semantic("unknown pattern function '" + name + "'", name_tok);
    }
    p.args.push_back(expect_ident("object variable"));
    while (peek().kind == Tok::Comma) {
      next();
      p.args.push_back(expect_ident("object variable"));
    }
    expect(Tok::RParen, ")");
    return p;
  }

  Condition parse_cond() {
    if (++depth_ > kMaxDepth) fail("condition nested too deeply", {});
    Condition first = parse_term();
    if (!peek_keyword("OR")) {
      --depth_;
      return first;
    }
    Condition node;
    node.kind = Condition::Kind::Or;
    node.children.push_back(std::move(first));
    while (peek_keyword("OR")) {
      next();
      node.children.push_back(parse_term());
    }
    --depth_;
    return node;
  }

  Condition parse_term() {
    Condition first = parse_pred();
    if (!peek_keyword("AND")) return first;
    Condition node;
    node.kind = Condition::Kind::And;
    node.children.push_back(std::move(first));
    while (peek_keyword("AND")) {
      next();
      node.children.push_back(parse_pred());
    }
    return node;
  }

  Condition parse_pred() {
    if (peek().kind == Tok::LParen) {
      next();
      Condition inner = parse_cond();
      expect(Tok::RParen, ")");
      return inner;
    }
    if (peek_keyword("COUNT")) return parse_count();

    Condition c;
    c.kind = Condition::Kind::Compare;
    if (peek().kind != Tok::Ident || reserved(peek().text))
      fail("expected predicate", {"identifier", "COUNT", "("});
    c.variable = next().text;
    expect(Tok::Dot, ".");
    c.field = parse_field();
    c.cmp = expect_cmp();
    const Token value_tok = peek();
    if (value_tok.kind == Tok::String) {
      next();
      std::string v = value_tok.text;
      // 'Not X' is sugar for != 'X'.
      if (v.size() > 4 && iequals(std::string_view(v).substr(0, 4), "not ") &&
          (c.cmp == Comparator::Eq || c.cmp == Comparator::Ne)) {
        v = v.substr(4);
        c.cmp = c.cmp == Comparator::Eq ? Comparator::Ne : Comparator::Eq;
      }
      c.value = std::move(v);
    } else if (value_tok.kind == Tok::Number) {
      semantic("label and attribute predicates compare against strings", value_tok);
    } else {
      fail("expected literal", {"string"});
    }
    return c;
  }

  FieldRef parse_field() {
    if (peek().kind != Tok::Ident) fail("expected field", {"label", "attr<name>"});
    const std::string word = next().text;
    FieldRef f;
    if (iequals(word, "label")) return f;
    f.kind = FieldRef::Kind::Attribute;
    if (iequals(word, "attr")) {
      if (peek().kind != Tok::Ident) fail("expected attribute name", {"identifier"});
      f.attribute = lower(next().text);
      return f;
    }
    if (word.size() > 4 && iequals(std::string_view(word).substr(0, 4), "attr")) {
      f.attribute = lower(std::string_view(word).substr(4));
      return f;
    }
    --pos_;
    fail("unknown field", {"label", "attr<name>"});
  }

  Condition parse_count() {
    next();  // COUNT
    Condition c;
    c.kind = Condition::Kind::Count;
    expect(Tok::LParen, "(");
    c.variable = expect_ident("object variable");
    expect(Tok::RParen, ")");
    c.cmp = expect_cmp();
    c.value = expect_number("count threshold");
    if (peek_keyword("FOR")) {
      next();
      expect_keyword("EACH");
      expect_keyword("FRAME");
      c.per_frame = true;
    }
    return c;
  }

  WindowSpec parse_window() {
    const Token at = peek();
    expect_keyword("TIMEFRAME_WINDOW");
    expect(Tok::LParen, "(");
    WindowSpec w;
    w.length_s = expect_number("window length in seconds");
    if (peek().kind == Tok::Comma) {
      next();
      w.slide_s = expect_number("window slide in seconds");
    }
    expect(Tok::RParen, ")");
    if (!(w.length_s > 0)) semantic("window length must be positive", at);
    if (w.length_s * 1000.0 < 1.0) semantic("window length below one millisecond", at);
    if (w.slide_s && !(*w.slide_s > 0 && *w.slide_s <= w.length_s))
      semantic("window slide must be positive and no longer than the window", at);
    if (w.slide_s && *w.slide_s * 1000.0 < 1.0) semantic("window slide below one millisecond", at);
    return w;
  }

  ConfidenceClause parse_confidence() {
    const Token at = peek();
    ConfidenceClause c;
    c.cmp = expect_cmp();
    if (c.cmp != Comparator::Gt && c.cmp != Comparator::Ge)
      semantic("WITH_CONFIDENCE accepts only > or >=", at);
    c.threshold = expect_number("confidence threshold");
    if (c.threshold < 0 || c.threshold > 1) semantic("confidence threshold must be in [0, 1]", at);
    return c;
  }

  static constexpr int kMaxDepth = 200;

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  int depth_ = 0;
  const CompositeRegistry& registry_;
};

std::string render_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out.push_back('\'');
    out.push_back(c);
  }
  out.push_back('\'');
  return out;
}

void render_cond(const Condition& c, std::ostringstream& os) {
  switch (c.kind) {
    case Condition::Kind::Compare:
      os << c.variable << "."
         << (c.field.kind == FieldRef::Kind::Label ? std::string("label") : "attr" + c.field.attribute)
         << " " << to_string(c.cmp) << " ";
      if (const auto* s = std::get_if<std::string>(&c.value))
        os << quote(*s);
      else
        os << render_number(std::get<double>(c.value));
      return;
    case Condition::Kind::Count:
      os << "COUNT(" << c.variable << ") " << to_string(c.cmp) << " "
         << render_number(std::get<double>(c.value));
      if (c.per_frame) os << " FOR EACH FRAME";
      return;
    case Condition::Kind::And:
    case Condition::Kind::Or: {
      const bool is_and = c.kind == Condition::Kind::And;
      for (std::size_t i = 0; i < c.children.size(); ++i) {
        if (i) os << (is_and ? " AND " : " OR ");
        const auto& child = c.children[i];
        // Same-kind children and ORs under AND need parentheses to keep shape.
        const bool paren = child.kind == c.kind ||
                           (is_and && child.kind == Condition::Kind::Or);
        if (paren) os << "(";
        render_cond(child, os);
        if (paren) os << ")";
      }
      return;
    }
  }
}

}  // namespace

QueryAST parse_veql(std::string_view text, const CompositeRegistry& registry) {
  Parser parser(Lexer(text).run(), registry);
  return parser.parse_query();
}

std::string render_veql(const QueryAST& ast) {
  std::ostringstream os;
  os << "SELECT ";
  if (ast.pattern.kind == Pattern::Kind::Object) {
    os << (ast.pattern.args.empty() ? std::string("Object") : ast.pattern.args.front());
  } else {
    os << ast.pattern.function << "(";
    for (std::size_t i = 0; i < ast.pattern.args.size(); ++i)
      os << (i ? ", " : "") << ast.pattern.args[i];
    os << ")";
  }
  os << " FROM " << ast.producer << " WHERE ";
  render_cond(ast.conditions, os);
  os << " WITHIN TIMEFRAME_WINDOW(" << render_number(ast.window.length_s);
  if (ast.window.slide_s) os << ", " << render_number(*ast.window.slide_s);
  os << ") WITH_CONFIDENCE " << to_string(ast.confidence.cmp) << " "
     << render_number(ast.confidence.threshold);
  return os.str();
}

}  // namespace cep::veql

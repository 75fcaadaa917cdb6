#include <cstdlib>

#include "arena/dsl.hpp"

// Lexer + recursive-descent parser + canonical printer for the tool language.

namespace arena {

bool ToolSignature::reads_collection(const std::string& c) const {
  for (const auto& r : reads)
    if (r == c) return true;
  return false;
}

bool ToolSignature::writes_collection(const std::string& c) const {
  for (const auto& w : writes)
    if (w == c) return true;
  return false;
}

const ParamSig* ToolSignature::find_param(const std::string& p) const {
  for (const auto& ps : params)
    if (ps.name == p) return &ps;
  return nullptr;
}

namespace {

enum class Tok {
  End, Ident, Int, Float, String,
  LBrace, RBrace, LParen, RParen, LBracket, RBracket,
  Comma, Colon, Dot, Arrow, Assign,
  Plus, Minus, Star, Slash, Percent,
  Eq, Ne, Lt, Le, Gt, Ge, AndAnd, OrOr, Bang, Question,
};

struct Token {
  Tok tok;
  std::string text;
  Value number;
  Span span;
};

struct Lexer {
  explicit Lexer(const std::string& src) : s(src) {}

  const std::string& s;
  std::size_t i = 0;
  int line = 1, col = 1;

  [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, {line, col}); }

  char peek() const { return i < s.size() ? s[i] : '\0'; }
  char peek2() const { return i + 1 < s.size() ? s[i + 1] : '\0'; }

  char advance() {
    char c = s[i++];
    if (c == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    return c;
  }

  void skip_ws() {
    while (i < s.size()) {
      char c = peek();
      if (c == '#') {
        while (i < s.size() && peek() != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else {
        break;
      }
    }
  }

  Token next() {
    skip_ws();
    Span at{line, col};
    if (i >= s.size()) return {Tok::End, "", {}, at};
    char c = advance();
    auto tok = [&](Tok t, const char* text) { return Token{t, text, {}, at}; };
    switch (c) {
      case '{': return tok(Tok::LBrace, "{");
      case '}': return tok(Tok::RBrace, "}");
      case '(': return tok(Tok::LParen, "(");
      case ')': return tok(Tok::RParen, ")");
      case '[': return tok(Tok::LBracket, "[");
      case ']': return tok(Tok::RBracket, "]");
      case ',': return tok(Tok::Comma, ",");
      case ':': return tok(Tok::Colon, ":");
      case '.': return tok(Tok::Dot, ".");
      case '+': return tok(Tok::Plus, "+");
      case '*': return tok(Tok::Star, "*");
      case '/': return tok(Tok::Slash, "/");
      case '%': return tok(Tok::Percent, "%");
      case '?': return tok(Tok::Question, "?");
      case '-':
        if (peek() == '>') {
          advance();
          return tok(Tok::Arrow, "->");
        }
        return tok(Tok::Minus, "-");
      case '=':
        if (peek() == '=') {
          advance();
          return tok(Tok::Eq, "==");
        }
        return tok(Tok::Assign, "=");
      case '!':
        if (peek() == '=') {
          advance();
          return tok(Tok::Ne, "!=");
        }
        return tok(Tok::Bang, "!");
      case '<':
        if (peek() == '=') {
          advance();
          return tok(Tok::Le, "<=");
        }
        return tok(Tok::Lt, "<");
      case '>':
        if (peek() == '=') {
          advance();
          return tok(Tok::Ge, ">=");
        }
        return tok(Tok::Gt, ">");
      case '&':
        if (peek() == '&') {
          advance();
          return tok(Tok::AndAnd, "&&");
        }
        fail("stray '&'");
      case '|':
        if (peek() == '|') {
          advance();
          return tok(Tok::OrOr, "||");
        }
        fail("stray '|'");
      case '"': {
        std::string out;
        while (true) {
          if (i >= s.size()) fail("unterminated string");
          char d = advance();
          if (d == '"') break;
          if (d == '\\') {
            if (i >= s.size()) fail("unterminated escape");
            char e = advance();
            switch (e) {
              case '"': out += '"'; break;
              case '\\': out += '\\'; break;
              case 'n': out += '\n'; break;
              case 't': out += '\t'; break;
              case 'r': out += '\r'; break;
              case 'u': {
                unsigned cp = 0;
                for (int k = 0; k < 4; ++k) {
                  if (i >= s.size()) fail("unterminated \\u escape");
                  char h = advance();
                  cp <<= 4;
                  if (h >= '0' && h <= '9') cp |= static_cast<unsigned>(h - '0');
                  else if (h >= 'a' && h <= 'f') cp |= static_cast<unsigned>(h - 'a' + 10);
                  else if (h >= 'A' && h <= 'F') cp |= static_cast<unsigned>(h - 'A' + 10);
                  else fail("bad \\u escape digit");
                }
                if (cp < 0x80) {
                  out += static_cast<char>(cp);
                } else if (cp < 0x800) {
                  out += static_cast<char>(0xC0 | (cp >> 6));
                  out += static_cast<char>(0x80 | (cp & 0x3F));
                } else {
                  out += static_cast<char>(0xE0 | (cp >> 12));
                  out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
                  out += static_cast<char>(0x80 | (cp & 0x3F));
                }
                break;
              }
              default: fail(std::string("unknown escape \\") + e);
            }
          } else {
            out += d;
          }
        }
        return {Tok::String, out, {}, at};
      }
      default: break;
    }
    if (c == '_' || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) {
      std::string id(1, c);
      while (true) {
        char d = peek();
        if (d == '_' || (d >= 'a' && d <= 'z') || (d >= 'A' && d <= 'Z') || (d >= '0' && d <= '9')) {
          id += advance();
        } else {
          break;
        }
      }
      return {Tok::Ident, id, {}, at};
    }
    if (c >= '0' && c <= '9') {
      std::string num(1, c);
      bool is_float = false;
      while (peek() >= '0' && peek() <= '9') num += advance();
      if (peek() == '.' && peek2() >= '0' && peek2() <= '9') {
        is_float = true;
        num += advance();
        while (peek() >= '0' && peek() <= '9') num += advance();
      }
      if (peek() == 'e' || peek() == 'E') {
        is_float = true;
        num += advance();
        if (peek() == '+' || peek() == '-') num += advance();
        if (!(peek() >= '0' && peek() <= '9')) fail("malformed exponent");
        while (peek() >= '0' && peek() <= '9') num += advance();
      }
      Token t{is_float ? Tok::Float : Tok::Int, num, {}, at};
      if (is_float) {
        t.number = Value(std::strtod(num.c_str(), nullptr));
      } else {
        t.number = Value(static_cast<std::int64_t>(std::strtoll(num.c_str(), nullptr, 10)));
      }
      return t;
    }
    fail(std::string("unexpected character '") + c + "'");
  }
};

const char* kKeywords[] = {"tool", "verifier", "reads", "writes", "let", "if", "else",
                           "for", "in", "insert", "update", "delete", "assert", "return",
                           "true", "false", "null", "db"};

bool is_keyword(const std::string& id) {
  for (const char* k : kKeywords)
    if (id == k) return true;
  return false;
}

const char* kBinderBuiltins[] = {"filter", "map", "count", "sort_by"};
const char* kPlainBuiltins[] = {"sum", "avg", "min", "max", "first", "len",
                                "contains", "lower", "concat", "round"};

bool is_binder_builtin(const std::string& n) {
  for (const char* k : kBinderBuiltins)
    if (n == k) return true;
  return false;
}

bool is_plain_builtin(const std::string& n) {
  for (const char* k : kPlainBuiltins)
    if (n == k) return true;
  return false;
}

struct Parser {
  explicit Parser(const std::string& src) : lex(src) { cur = lex.next(); }

  Lexer lex;
  Token cur;

  [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, cur.span); }

  void bump() { cur = lex.next(); }

  bool at(Tok t) const { return cur.tok == t; }
  bool at_ident(const char* kw) const { return cur.tok == Tok::Ident && cur.text == kw; }

  Token expect(Tok t, const char* what) {
    if (cur.tok != t) fail(std::string("expected ") + what);
    Token out = cur;
    bump();
    return out;
  }

  std::string expect_plain_ident(const char* what) {
    if (cur.tok != Tok::Ident) fail(std::string("expected ") + what);
    if (is_keyword(cur.text)) fail("'" + cur.text + "' is a reserved word");
    std::string id = cur.text;
    bump();
    return id;
  }

  bool eat_ident(const char* kw) {
    if (at_ident(kw)) {
      bump();
      return true;
    }
    return false;
  }

  // ---- expressions, precedence climbing -----------------------------------

  ExprPtr make(Expr::Tag tag, Span span) {
    auto e = std::make_unique<Expr>();
    e->tag = tag;
    e->span = span;
    return e;
  }

  ExprPtr parse_expr() { return parse_or(); }

  ExprPtr parse_or() {
    ExprPtr l = parse_and();
    while (at(Tok::OrOr)) {
      Span sp = cur.span;
      bump();
      auto e = make(Expr::Tag::Binary, sp);
      e->bop = BinOp::Or;
      e->a = std::move(l);
      e->b = parse_and();
      l = std::move(e);
    }
    return l;
  }

  ExprPtr parse_and() {
    ExprPtr l = parse_cmp();
    while (at(Tok::AndAnd)) {
      Span sp = cur.span;
      bump();
      auto e = make(Expr::Tag::Binary, sp);
      e->bop = BinOp::And;
      e->a = std::move(l);
      e->b = parse_cmp();
      l = std::move(e);
    }
    return l;
  }

  ExprPtr parse_cmp() {
    ExprPtr l = parse_add();
    auto op = [&]() -> std::optional<BinOp> {
      switch (cur.tok) {
        case Tok::Eq: return BinOp::Eq;
        case Tok::Ne: return BinOp::Ne;
        case Tok::Lt: return BinOp::Lt;
        case Tok::Le: return BinOp::Le;
        case Tok::Gt: return BinOp::Gt;
        case Tok::Ge: return BinOp::Ge;
        default: return std::nullopt;
      }
    };
    if (auto o = op()) {
      Span sp = cur.span;
      bump();
      auto e = make(Expr::Tag::Binary, sp);
      e->bop = *o;
      e->a = std::move(l);
      e->b = parse_add();  // comparisons do not chain
      return e;
    }
    return l;
  }

  ExprPtr parse_add() {
    ExprPtr l = parse_mul();
    while (at(Tok::Plus) || at(Tok::Minus)) {
      BinOp o = at(Tok::Plus) ? BinOp::Add : BinOp::Sub;
      Span sp = cur.span;
      bump();
      auto e = make(Expr::Tag::Binary, sp);
      e->bop = o;
      e->a = std::move(l);
      e->b = parse_mul();
      l = std::move(e);
    }
    return l;
  }

  ExprPtr parse_mul() {
    ExprPtr l = parse_unary();
    while (at(Tok::Star) || at(Tok::Slash) || at(Tok::Percent)) {
      BinOp o = at(Tok::Star) ? BinOp::Mul : at(Tok::Slash) ? BinOp::Div : BinOp::Mod;
      Span sp = cur.span;
      bump();
      auto e = make(Expr::Tag::Binary, sp);
      e->bop = o;
      e->a = std::move(l);
      e->b = parse_unary();
      l = std::move(e);
    }
    return l;
  }

  ExprPtr parse_unary() {
    if (at(Tok::Minus) || at(Tok::Bang)) {
      Span sp = cur.span;
      UnOp o = at(Tok::Minus) ? UnOp::Neg : UnOp::Not;
      bump();
      auto e = make(Expr::Tag::Unary, sp);
      e->uop = o;
      e->a = parse_unary();
      return e;
    }
    return parse_postfix();
  }

  ExprPtr parse_postfix() {
    ExprPtr e = parse_primary();
    while (true) {
      if (at(Tok::Dot)) {
        Span sp = cur.span;
        bump();
        std::string field = expect_plain_ident("field name");
        auto f = make(Expr::Tag::Field, sp);
        f->name = field;
        f->a = std::move(e);
        e = std::move(f);
      } else if (at(Tok::LBracket)) {
        Span sp = cur.span;
        bump();
        auto ix = make(Expr::Tag::Index, sp);
        ix->a = std::move(e);
        ix->b = parse_expr();
        expect(Tok::RBracket, "']'");
        e = std::move(ix);
      } else {
        break;
      }
    }
    return e;
  }

  ExprPtr parse_primary() {
    Span sp = cur.span;
    switch (cur.tok) {
      case Tok::Int:
      case Tok::Float: {
        auto e = make(Expr::Tag::Lit, sp);
        e->lit = cur.number;
        bump();
        return e;
      }
      case Tok::String: {
        auto e = make(Expr::Tag::Lit, sp);
        e->lit = Value(cur.text);
        bump();
        return e;
      }
      case Tok::LParen: {
        bump();
        ExprPtr e = parse_expr();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::LBracket: {
        bump();
        auto e = make(Expr::Tag::ListLit, sp);
        if (!at(Tok::RBracket)) {
          while (true) {
            e->args.push_back(parse_expr());
            if (!at(Tok::Comma)) break;
            bump();
          }
        }
        expect(Tok::RBracket, "']'");
        return e;
      }
      case Tok::LBrace: {
        bump();
        auto e = make(Expr::Tag::ObjectLit, sp);
        if (!at(Tok::RBrace)) {
          while (true) {
            Token k = expect(Tok::String, "string key");
            expect(Tok::Colon, "':'");
            e->keys.push_back(k.text);
            e->args.push_back(parse_expr());
            if (!at(Tok::Comma)) break;
            bump();
          }
        }
        expect(Tok::RBrace, "'}'");
        return e;
      }
      case Tok::Ident: {
        std::string id = cur.text;
        if (id == "true" || id == "false") {
          auto e = make(Expr::Tag::Lit, sp);
          e->lit = Value(id == "true");
          bump();
          return e;
        }
        if (id == "null") {
          auto e = make(Expr::Tag::Lit, sp);
          bump();
          return e;
        }
        if (id == "db") {
          bump();
          expect(Tok::Dot, "'.' after db");
          std::string coll = expect_plain_ident("collection name");
          auto e = make(Expr::Tag::Db, sp);
          e->name = coll;
          return e;
        }
        if (is_binder_builtin(id) || is_plain_builtin(id)) {
          bump();
          expect(Tok::LParen, "'('");
          auto e = make(Expr::Tag::Call, sp);
          e->name = id;
          if (is_binder_builtin(id)) {
            e->args.push_back(parse_expr());
            expect(Tok::Comma, "','");
            e->binder = expect_plain_ident("binder variable");
            expect(Tok::Comma, "','");
            e->args.push_back(parse_expr());
          } else if (!at(Tok::RParen)) {
            while (true) {
              e->args.push_back(parse_expr());
              if (!at(Tok::Comma)) break;
              bump();
            }
          }
          expect(Tok::RParen, "')'");
          return e;
        }
        if (is_keyword(id)) fail("'" + id + "' is a reserved word");
        bump();
        if (at(Tok::LParen)) fail("unknown builtin '" + id + "'");
        auto e = make(Expr::Tag::Var, sp);
        e->name = id;
        return e;
      }
      default: fail("expected expression");
    }
  }

  // ---- statements ---------------------------------------------------------

  StmtPtr make_stmt(Stmt::Tag tag, Span span) {
    auto s = std::make_unique<Stmt>();
    s->tag = tag;
    s->span = span;
    return s;
  }

  std::vector<StmtPtr> parse_block() {
    expect(Tok::LBrace, "'{'");
    std::vector<StmtPtr> out;
    while (!at(Tok::RBrace)) {
      if (at(Tok::End)) fail("unterminated block");
      out.push_back(parse_stmt());
    }
    bump();
    return out;
  }

  StmtPtr parse_stmt() {
    Span sp = cur.span;
    if (eat_ident("let")) {
      auto s = make_stmt(Stmt::Tag::Let, sp);
      s->name = expect_plain_ident("variable name");
      expect(Tok::Assign, "'='");
      s->e1 = parse_expr();
      return s;
    }
    if (eat_ident("if")) {
      auto s = make_stmt(Stmt::Tag::If, sp);
      s->e1 = parse_expr();
      s->body = parse_block();
      if (eat_ident("else")) s->els = parse_block();
      return s;
    }
    if (eat_ident("for")) {
      auto s = make_stmt(Stmt::Tag::For, sp);
      s->name = expect_plain_ident("loop variable");
      if (!eat_ident("in")) fail("expected 'in'");
      s->e1 = parse_expr();
      s->body = parse_block();
      return s;
    }
    if (eat_ident("insert")) {
      auto s = make_stmt(Stmt::Tag::Insert, sp);
      expect(Tok::LParen, "'('");
      s->coll = expect_plain_ident("collection name");
      expect(Tok::Comma, "','");
      s->e1 = parse_expr();
      expect(Tok::RParen, "')'");
      return s;
    }
    if (eat_ident("update")) {
      auto s = make_stmt(Stmt::Tag::Update, sp);
      expect(Tok::LParen, "'('");
      s->coll = expect_plain_ident("collection name");
      expect(Tok::Comma, "','");
      s->name = expect_plain_ident("binder variable");
      expect(Tok::Comma, "','");
      s->e1 = parse_expr();
      expect(Tok::Comma, "','");
      s->e2 = parse_expr();
      expect(Tok::RParen, "')'");
      return s;
    }
    if (eat_ident("delete")) {
      auto s = make_stmt(Stmt::Tag::Delete, sp);
      expect(Tok::LParen, "'('");
      s->coll = expect_plain_ident("collection name");
      expect(Tok::Comma, "','");
      s->name = expect_plain_ident("binder variable");
      expect(Tok::Comma, "','");
      s->e1 = parse_expr();
      expect(Tok::RParen, "')'");
      return s;
    }
    if (eat_ident("assert")) {
      auto s = make_stmt(Stmt::Tag::Assert, sp);
      s->e1 = parse_expr();
      if (at(Tok::Comma)) {
        bump();
        Token m = expect(Tok::String, "assert message string");
        s->msg = m.text;
        s->has_msg = true;
      }
      return s;
    }
    if (eat_ident("return")) {
      auto s = make_stmt(Stmt::Tag::Return, sp);
      s->e1 = parse_expr();
      return s;
    }
    fail("expected statement");
  }

  // ---- program header -----------------------------------------------------

  std::vector<std::string> parse_name_list() {
    expect(Tok::LBracket, "'['");
    std::vector<std::string> names;
    if (!at(Tok::RBracket)) {
      while (true) {
        names.push_back(expect_plain_ident("collection name"));
        if (!at(Tok::Comma)) break;
        bump();
      }
    }
    expect(Tok::RBracket, "']'");
    return names;
  }

  Program parse_one() {
    Program p;
    if (eat_ident("tool")) {
      p.is_verifier = false;
    } else if (eat_ident("verifier")) {
      p.is_verifier = true;
    } else {
      fail("expected 'tool' or 'verifier'");
    }
    p.sig.name = expect_plain_ident("program name");
    expect(Tok::LParen, "'('");
    if (!at(Tok::RParen)) {
      while (true) {
        ParamSig ps;
        ps.name = expect_plain_ident("parameter name");
        if (at(Tok::Question)) {
          bump();
          ps.required = false;
        }
        if (at(Tok::Colon)) {
          bump();
          if (cur.tok != Tok::Ident) fail("expected parameter kind");
          bool any = false;
          try {
            ps.kind = kind_from_name(cur.text, &any);
          } catch (const ValueError&) {
            fail("unknown kind '" + cur.text + "'");
          }
          ps.is_any = any;
          bump();
        }
        p.sig.params.push_back(std::move(ps));
        if (!at(Tok::Comma)) break;
        bump();
      }
    }
    expect(Tok::RParen, "')'");
    if (at(Tok::Arrow)) {
      bump();
      if (cur.tok != Tok::Ident) fail("expected return kind");
      bool any = false;
      try {
        p.sig.returns = kind_from_name(cur.text, &any);
      } catch (const ValueError&) {
        fail("unknown kind '" + cur.text + "'");
      }
      p.sig.returns_any = any;
      bump();
    }
    if (eat_ident("reads")) p.sig.reads = parse_name_list();
    if (eat_ident("writes")) p.sig.writes = parse_name_list();
    std::sort(p.sig.reads.begin(), p.sig.reads.end());
    std::sort(p.sig.writes.begin(), p.sig.writes.end());
    p.body = parse_block();
    return p;
  }
};

// ---- printer --------------------------------------------------------------

int precedence(BinOp op) {
  switch (op) {
    case BinOp::Or: return 1;
    case BinOp::And: return 2;
    case BinOp::Eq:
    case BinOp::Ne:
    case BinOp::Lt:
    case BinOp::Le:
    case BinOp::Gt:
    case BinOp::Ge: return 3;
    case BinOp::Add:
    case BinOp::Sub: return 4;
    default: return 5;
  }
}

const char* op_text(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Mod: return "%";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::And: return "&&";
    case BinOp::Or: return "||";
  }
  return "?";
}

void print_expr(const Expr& e, int parent_prec, std::string& out) {
  switch (e.tag) {
    case Expr::Tag::Lit:
      out += canonical_dump(e.lit);
      break;
    case Expr::Tag::Var:
      out += e.name;
      break;
    case Expr::Tag::Db:
      out += "db." + e.name;
      break;
    case Expr::Tag::Field:
      print_expr(*e.a, 7, out);
      out += "." + e.name;
      break;
    case Expr::Tag::Index:
      print_expr(*e.a, 7, out);
      out += "[";
      print_expr(*e.b, 0, out);
      out += "]";
      break;
    case Expr::Tag::Unary: {
      bool paren = parent_prec >= 7;  // operand of field access / indexing
      if (paren) out += "(";
      out += e.uop == UnOp::Neg ? "-" : "!";
      print_expr(*e.a, 6, out);
      if (paren) out += ")";
      break;
    }
    case Expr::Tag::Binary: {
      int p = precedence(e.bop);
      bool paren = p < parent_prec;
      if (paren) out += "(";
      // Comparisons do not chain, so a comparison operand of a comparison
      // needs explicit parens on the left as well.
      print_expr(*e.a, p == 3 ? p + 1 : p, out);
      out += " ";
      out += op_text(e.bop);
      out += " ";
      print_expr(*e.b, p + 1, out);
      if (paren) out += ")";
      break;
    }
    case Expr::Tag::Call: {
      out += e.name + "(";
      if (!e.binder.empty()) {
        print_expr(*e.args[0], 0, out);
        out += ", " + e.binder + ", ";
        print_expr(*e.args[1], 0, out);
      } else {
        for (std::size_t i = 0; i < e.args.size(); ++i) {
          if (i) out += ", ";
          print_expr(*e.args[i], 0, out);
        }
      }
      out += ")";
      break;
    }
    case Expr::Tag::ListLit: {
      out += "[";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) out += ", ";
        print_expr(*e.args[i], 0, out);
      }
      out += "]";
      break;
    }
    case Expr::Tag::ObjectLit: {
      out += "{";
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (i) out += ", ";
        out += canonical_dump(Value(e.keys[i])) + ": ";
        print_expr(*e.args[i], 0, out);
      }
      out += "}";
      break;
    }
  }
}

std::string expr_text(const Expr& e) {
  std::string out;
  print_expr(e, 0, out);
  return out;
}

void print_block(const std::vector<StmtPtr>& body, int depth, std::string& out);

void print_stmt(const Stmt& s, int depth, std::string& out) {
  out.append(static_cast<std::size_t>(depth * 2), ' ');
  switch (s.tag) {
    case Stmt::Tag::Let:
      out += "let " + s.name + " = " + expr_text(*s.e1) + "\n";
      break;
    case Stmt::Tag::If:
      out += "if " + expr_text(*s.e1) + " {\n";
      print_block(s.body, depth + 1, out);
      out.append(static_cast<std::size_t>(depth * 2), ' ');
      if (s.els.empty()) {
        out += "}\n";
      } else {
        out += "} else {\n";
        print_block(s.els, depth + 1, out);
        out.append(static_cast<std::size_t>(depth * 2), ' ');
        out += "}\n";
      }
      break;
    case Stmt::Tag::For:
      out += "for " + s.name + " in " + expr_text(*s.e1) + " {\n";
      print_block(s.body, depth + 1, out);
      out.append(static_cast<std::size_t>(depth * 2), ' ');
      out += "}\n";
      break;
    case Stmt::Tag::Insert:
      out += "insert(" + s.coll + ", " + expr_text(*s.e1) + ")\n";
      break;
    case Stmt::Tag::Update:
      out += "update(" + s.coll + ", " + s.name + ", " + expr_text(*s.e1) + ", " +
             expr_text(*s.e2) + ")\n";
      break;
    case Stmt::Tag::Delete:
      out += "delete(" + s.coll + ", " + s.name + ", " + expr_text(*s.e1) + ")\n";
      break;
    case Stmt::Tag::Assert:
      out += "assert " + expr_text(*s.e1);
      if (s.has_msg) out += ", " + canonical_dump(Value(s.msg));
      out += "\n";
      break;
    case Stmt::Tag::Return:
      out += "return " + expr_text(*s.e1) + "\n";
      break;
  }
}

void print_block(const std::vector<StmtPtr>& body, int depth, std::string& out) {
  for (const auto& s : body) print_stmt(*s, depth, out);
}

}  // namespace

ProgramPtr parse_program(const std::string& source) {
  Parser p(source);
  auto prog = std::make_shared<Program>(p.parse_one());
  if (!p.at(Tok::End)) throw ParseError("trailing input after program", p.cur.span);
  return prog;
}

std::vector<ProgramPtr> parse_program_file(const std::string& source) {
  Parser p(source);
  std::vector<ProgramPtr> out;
  while (!p.at(Tok::End)) {
    out.push_back(std::make_shared<Program>(p.parse_one()));
  }
  if (out.empty()) throw ParseError("no programs in file", {1, 1});
  return out;
}

std::string print_program(const Program& p) {
  std::string out = p.is_verifier ? "verifier " : "tool ";
  out += p.sig.name + "(";
  for (std::size_t i = 0; i < p.sig.params.size(); ++i) {
    const auto& ps = p.sig.params[i];
    if (i) out += ", ";
    out += ps.name;
    if (!ps.required) out += "?";
    out += ": ";
    out += ps.is_any ? "any" : kind_name(ps.kind);
  }
  out += ")";
  if (!p.sig.returns_any) out += std::string(" -> ") + kind_name(p.sig.returns);
  out += " reads [";
  for (std::size_t i = 0; i < p.sig.reads.size(); ++i) {
    if (i) out += ", ";
    out += p.sig.reads[i];
  }
  out += "] writes [";
  for (std::size_t i = 0; i < p.sig.writes.size(); ++i) {
    if (i) out += ", ";
    out += p.sig.writes[i];
  }
  out += "] {\n";
  print_block(p.body, 1, out);
  out += "}\n";
  return out;
}

}  // namespace arena

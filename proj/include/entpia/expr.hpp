#pragma once

// Small arithmetic expression language for user-defined coefficients.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?
//   primary := number | name | func '(' expr (',' expr)* ')' | '(' expr ')'
//
// Functions: sin cos exp ln sqrt abs (one argument), min max (two arguments).
// The constant `pi` is predefined. Expressions compile to a postfix program that
// is immutable after construction and safe to evaluate from several threads.

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "entpia/core.hpp"

namespace entpia {

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t position)
      : Error(msg + " at position " + std::to_string(position)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class Expression {
 public:
  Expression() = default;

  /// Compiles `text`; `vars` fixes the order of values passed to `operator()`.
  Expression(std::string_view text, std::vector<std::string> vars)
      : text_(text), vars_(std::move(vars)) {
    Parser p{text_, vars_, program_};
    p.parse();
  }

  /// Evaluates at `values` (same order as the declared variables). Throws EvalError
  /// on a domain error or a non-finite result, naming the offending point.
  double operator()(std::span<const double> values) const {
    double stack[64];
    int top = 0;
    for (const Op& op : program_) {
      switch (op.code) {
        case Code::Const: stack[top++] = op.value; break;
        case Code::Var: stack[top++] = values[op.index]; break;
        case Code::Neg: stack[top - 1] = -stack[top - 1]; break;
        case Code::Add: --top; stack[top - 1] += stack[top]; break;
        case Code::Sub: --top; stack[top - 1] -= stack[top]; break;
        case Code::Mul: --top; stack[top - 1] *= stack[top]; break;
        case Code::Div:
          --top;
          if (stack[top] == 0.0) fail("division by zero", values);
          stack[top - 1] /= stack[top];
          break;
        case Code::Pow: --top; stack[top - 1] = std::pow(stack[top - 1], stack[top]); break;
        case Code::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
        case Code::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
        case Code::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
        case Code::Ln:
          if (stack[top - 1] <= 0.0) fail("ln of non-positive argument", values);
          stack[top - 1] = std::log(stack[top - 1]);
          break;
        case Code::Sqrt:
          if (stack[top - 1] < 0.0) fail("sqrt of negative argument", values);
          stack[top - 1] = std::sqrt(stack[top - 1]);
          break;
        case Code::Abs: stack[top - 1] = std::abs(stack[top - 1]); break;
        case Code::Min: --top; stack[top - 1] = std::min(stack[top - 1], stack[top]); break;
        case Code::Max: --top; stack[top - 1] = std::max(stack[top - 1], stack[top]); break;
      }
    }
    const double out = stack[0];
    if (!std::isfinite(out)) fail("non-finite value", values);
    return out;
  }

  const std::string& text() const { return text_; }

  /// True when the compiled program reads the variable at `index`.
  bool uses(int index) const {
    for (const Op& op : program_)
      if (op.code == Code::Var && op.index == index) return true;
    return false;
  }
  const std::vector<std::string>& variables() const { return vars_; }

 private:
  enum class Code { Const, Var, Neg, Add, Sub, Mul, Div, Pow, Sin, Cos, Exp, Ln, Sqrt, Abs, Min, Max };
  struct Op {
    Code code;
    double value = 0.0;
    int index = 0;
  };

  [[noreturn]] void fail(const char* what, std::span<const double> values) const {
    std::string msg = std::string("expression '") + text_ + "': " + what + " at (";
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (i) msg += ", ";
      msg += vars_[i] + "=" + std::to_string(values[i]);
    }
    throw EvalError(msg + ")");
  }

  struct Parser {
    const std::string& s;
    const std::vector<std::string>& vars;
    std::vector<Op>& out;
    std::size_t pos = 0;
    int depth = 0;
    int max_depth = 0;

    void parse() {
      expr();
      skip();
      if (pos != s.size()) throw ParseError("unexpected '" + std::string(1, s[pos]) + "'", pos);
      if (max_depth > 60) throw ParseError("expression too deeply nested", 0);
    }

    void push(Code c, double v = 0.0, int idx = 0) {
      out.push_back({c, v, idx});
      switch (c) {
        case Code::Const:
        case Code::Var: ++depth; break;
        case Code::Add: case Code::Sub: case Code::Mul: case Code::Div:
        case Code::Pow: case Code::Min: case Code::Max: --depth; break;
        default: break;
      }
      max_depth = std::max(max_depth, depth);
    }

    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool eat(char c) {
      skip();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    void expect(char c) {
      if (!eat(c)) throw ParseError(std::string("expected '") + c + "'", pos);
    }

    void expr() {
      term();
      for (;;) {
        if (eat('+')) { term(); push(Code::Add); }
        else if (eat('-')) { term(); push(Code::Sub); }
        else return;
      }
    }
    void term() {
      unary();
      for (;;) {
        if (eat('*')) { unary(); push(Code::Mul); }
        else if (eat('/')) { unary(); push(Code::Div); }
        else return;
      }
    }
    void unary() {
      if (eat('-')) { unary(); push(Code::Neg); return; }
      if (eat('+')) { unary(); return; }
      power();
    }
    void power() {
      primary();
      if (eat('^')) { unary(); push(Code::Pow); }
    }
    void primary() {
      skip();
      if (pos >= s.size()) throw ParseError("unexpected end of expression", pos);
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        number();
        return;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const std::size_t start = pos;
        while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
        const std::string name = s.substr(start, pos - start);
        skip();
        if (pos < s.size() && s[pos] == '(') {
          call(name, start);
          return;
        }
        for (std::size_t i = 0; i < vars.size(); ++i)
          if (vars[i] == name) { push(Code::Var, 0.0, static_cast<int>(i)); return; }
        if (name == "pi") { push(Code::Const, std::numbers::pi); return; }
        throw ParseError("unknown variable '" + name + "'", start);
      }
      if (eat('(')) {
        expr();
        expect(')');
        return;
      }
      throw ParseError("unexpected '" + std::string(1, c) + "'", pos);
    }
    void number() {
      const char* begin = s.c_str() + pos;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) throw ParseError("malformed number", pos);
      pos += static_cast<std::size_t>(end - begin);
      push(Code::Const, v);
    }
    void call(const std::string& name, std::size_t at) {
      struct Fn { const char* name; Code code; int arity; };
      static constexpr Fn fns[] = {{"sin", Code::Sin, 1},  {"cos", Code::Cos, 1}, {"exp", Code::Exp, 1},
                                   {"ln", Code::Ln, 1},    {"sqrt", Code::Sqrt, 1}, {"abs", Code::Abs, 1},
                                   {"min", Code::Min, 2},  {"max", Code::Max, 2}};
      for (const Fn& f : fns) {
        if (name != f.name) continue;
        expect('(');
        expr();
        for (int k = 1; k < f.arity; ++k) {
          expect(',');
          expr();
        }
        expect(')');
        push(f.code);
        return;
      }
      throw ParseError("unknown function '" + name + "'", at);
    }
  };

  std::string text_;
  std::vector<std::string> vars_;
  std::vector<Op> program_;
};

/// Parses a coefficient expression over the given ordered variable names.
inline Expression parse_coefficient_expr(std::string_view text, std::vector<std::string> vars) {
  return Expression(text, std::move(vars));
}

}  // namespace entpia

#pragma once

#include <stdexcept>
#include <string>

#include "ifaq/ast.hpp"

namespace ifaq {

struct ParseError : std::runtime_error {
    int line, col;
    ParseError(int l, int c, const std::string& msg)
        : std::runtime_error("parse error at " + std::to_string(l) + ":" + std::to_string(c) +
                             ": " + msg),
          line(l),
          col(c) {}
};

// Concrete syntax:
//   let x = e in e        sum(x in e) e        lambda(x in e) e
//   dom(e)  e(e)  e.f  e[e]  `f`  {f=e,...}  <f=e>  {{k -> v,...}}  [[e,...]]
//   if e then e else e    -- line comments
// Programs: prelude lets, then optionally  x <- e; while (e) { x = e } e
Program parseProgram(const std::string& src);
ExprPtr parseExpr(const std::string& src);

std::string printExpr(const ExprPtr& e);
std::string printProgram(const Program& p);

}  // namespace ifaq

#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ifaq/ast.hpp"
#include "ifaq/schema.hpp"

namespace ifaq {

struct SpecializeError : std::runtime_error {
    int line, col;
    SpecializeError(int l, int c, const std::string& msg)
        : std::runtime_error("specialization failure at " + std::to_string(l) + ":" +
                             std::to_string(c) + ": " + msg),
          line(l),
          col(c) {}
};

struct RewriteStep {
    std::string pass;
    std::string rule;
    std::string path;    // program slot the rewrite happened in
    std::string before;  // rewritten node, pretty-printed
    std::string after;
};

struct RewriteTrace {
    std::vector<RewriteStep> steps;
    // Full-program snapshots after each step; replaying the trace must end in
    // the final program, which is what the last snapshot certifies.
    std::vector<std::string> states;

    std::string toJsonLines() const;
};

// Cardinality estimates for loop scheduling: set sizes for feature sets and
// set-literal bindings, dictionary sizes for relations and join views.
struct CardEnv {
    std::map<std::string, long long> setSize;
    std::map<std::string, long long> dictSize;
};

CardEnv cardEnvFor(const Program& p, const Schema& s);
std::optional<long long> estimateCollection(const ExprPtr& coll, const CardEnv& env);

// Rewrite pass families. Expression-level entry points take optional
// context; the program-level pipeline wires them together in order.
ExprPtr normalize(ExprPtr e, RewriteTrace* trace = nullptr, const std::string& path = "");
ExprPtr scheduleLoops(ExprPtr e, const CardEnv& env, RewriteTrace* trace = nullptr,
                      const std::string& path = "");
ExprPtr factorize(ExprPtr e, RewriteTrace* trace = nullptr, const std::string& path = "");
Program staticMemoize(const Program& p, const Schema& s, RewriteTrace* trace = nullptr);
Program hoistLoopInvariants(const Program& p, RewriteTrace* trace = nullptr);
Program partialEval(const Program& p, RewriteTrace* trace = nullptr);
ExprPtr partialEvalExpr(ExprPtr e, RewriteTrace* trace = nullptr,
                        const std::string& path = "");
ExprPtr specializeSchema(ExprPtr e, const Schema& s, RewriteTrace* trace = nullptr,
                         const std::string& path = "");
ExprPtr fuseLoops(ExprPtr e, RewriteTrace* trace = nullptr, const std::string& path = "");
Program fuseLoopsProgram(const Program& p, RewriteTrace* trace = nullptr);
ExprPtr genericOptsExpr(ExprPtr e, RewriteTrace* trace = nullptr,
                        const std::string& path = "");
Program genericOpts(const Program& p, RewriteTrace* trace = nullptr);

// The full high-level schedule: normalize, scheduleLoops, factorize,
// staticMemoize, hoistLoopInvariants, partialEval, specializeSchema,
// genericOpts. Also exposes the intermediate programs for golden tests.
struct PipelineResult {
    Program final;
    std::vector<std::pair<std::string, Program>> stages;  // pass name -> program after
};

PipelineResult runHighLevelPipeline(const Program& p, const Schema& s,
                                    RewriteTrace* trace = nullptr);

// Applies an expression transform to every program slot.
template <typename F>
Program mapProgram(const Program& p, F f) {
    Program out;
    for (const auto& [n, e] : p.prelude) out.prelude.emplace_back(n, f(e, "prelude." + n));
    if (p.loop) {
        Program::Loop l;
        l.var = p.loop->var;
        l.init = f(p.loop->init, "loop.init");
        l.cond = f(p.loop->cond, "loop.cond");
        l.step = f(p.loop->step, "loop.step");
        out.loop = std::move(l);
    }
    out.result = f(p.result, "result");
    return out;
}

}  // namespace ifaq

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ifaq/aggopt.hpp"
#include "ifaq/apps.hpp"
#include "ifaq/data.hpp"
#include "ifaq/exec.hpp"
#include "ifaq/frontend.hpp"
#include "ifaq/interp.hpp"
#include "ifaq/ir_ops.hpp"
#include "ifaq/rewrite.hpp"
#include "ifaq/schema.hpp"
#include "ifaq/typecheck.hpp"

using namespace ifaq;

namespace {

// Exit codes: 1 parse, 2 type, 3 planning, 4 runtime.
constexpr int kExitParse = 1;
constexpr int kExitType = 2;
constexpr int kExitPlan = 3;
constexpr int kExitRuntime = 4;

std::string slurpFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EvalError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void writeFile(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EvalError("cannot write " + path);
    out << bytes;
}

enum class PassLevel { None, HighLevel, Agg, All };

PassLevel parsePasses(const std::string& s) {
    if (s == "none") return PassLevel::None;
    if (s == "highlevel") return PassLevel::HighLevel;
    if (s == "agg") return PassLevel::Agg;
    if (s == "all") return PassLevel::All;
    throw CLI::ValidationError("--passes", "expected none|highlevel|agg|all");
}

// Schema problems (missing or malformed file) are type-level failures for
// exit-code purposes: without a schema nothing can be checked or specialized.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Schema loadSchemaChecked(const std::string& path) {
    try {
        return loadSchemaFile(path);
    } catch (const std::exception& e) {
        throw SchemaError(e.what());
    }
}

int checkTypes(const Program& p, const Schema& s) {
    TypecheckResult tc = typecheck(alphaRename(p), s);
    if (tc.ok) return 0;
    for (const auto& e : tc.errors)
        std::cerr << "type error at " << e.line << ":" << e.col << ": " << e.message
                  << "\n  in " << e.snippet << "\n";
    return kExitType;
}

struct RunArgs {
    std::string program, schema, dbDir;
    std::string passes = "all";
    long long maxIters = 1;
    std::optional<double> epsilon;
    std::string outPath = "result.json";
    std::string statsPath = "stats.json";
};

int cmdRun(const RunArgs& a) {
    Program p = parseProgram(slurpFile(a.program));
    Schema s = loadSchemaChecked(a.schema);
    // Dynamic field access is legal in source programs and only disappears
    // after schema specialization, so the static check runs on the
    // specialized form even when evaluation then uses the raw program.
    Program hl = runHighLevelPipeline(p, s).final;
    if (int rc = checkTypes(hl, s)) return rc;
    Database db = loadCSV(a.dbDir, s);

    PassLevel level = parsePasses(a.passes);
    Program opt = level == PassLevel::None ? p
                  : level >= PassLevel::Agg ? applyAggOpt(hl, s)
                                            : hl;

    IterationPolicy policy{a.maxIters, a.epsilon};
    std::pair<Value, CostStats> r;
    if (level == PassLevel::All) {
        PhysicalPlan plan = chooseLayouts(opt, s, db);
        r = execute(plan, db, policy);
    } else {
        r = eval(opt, db, policy);
    }

    writeFile(a.outPath, valueToJson(r.first).dump(2) + "\n");
    writeFile(a.statsPath, r.second.toJson() + "\n");
    return 0;
}

struct TraceArgs {
    std::string program, schema;
    std::string outPath = "trace.jsonl";
    std::string stagesPath;  // empty: stdout
};

int cmdTrace(const TraceArgs& a) {
    Program p = parseProgram(slurpFile(a.program));
    Schema s = loadSchemaChecked(a.schema);

    RewriteTrace trace;
    PipelineResult r = runHighLevelPipeline(p, s, &trace);
    if (int rc = checkTypes(r.final, s)) return rc;
    writeFile(a.outPath, trace.toJsonLines());

    std::ostringstream os;
    os << "== source ==\n" << printProgram(p) << "\n";
    for (const auto& [name, prog] : r.stages)
        os << "== " << name << " ==\n" << printProgram(prog) << "\n";
    std::vector<std::string> diags;
    Program lowered = applyAggOpt(r.final, s, &diags);
    os << "== aggopt ==\n" << printProgram(lowered) << "\n";
    for (const auto& d : diags) os << "-- aggopt skipped: " << d << "\n";
    if (a.stagesPath.empty())
        std::cout << os.str();
    else
        writeFile(a.stagesPath, os.str());
    return 0;
}

struct BenchArgs {
    std::vector<long long> sales = {100, 1000, 10000};
    std::vector<long long> iters = {1, 10};
    std::vector<std::string> passes = {"none", "highlevel", "agg", "all"};
    std::uint64_t seed = 1;
    std::string outPath = "bench.csv";
};

int cmdBench(const BenchArgs& a) {
    using Clock = std::chrono::steady_clock;
    std::ostringstream csv;
    csv << "sales,iters,passes,wallMs,tuplesScanned,arithmeticOps,dictLookups,"
           "dictInserts,loopIterations\n";

    for (long long sales : a.sales) {
        GenSpec spec;
        spec.seed = a.seed;
        spec.sales = sales;
        Schema s = retailSchema(spec);
        Database db = generateRetail(spec);

        // The unoptimized plan reads a pre-materialized join so each
        // iteration still scans |Q| tuples without re-running the n-way
        // nested-loop join per config. Materialization counts as data
        // preparation and stays outside the timed region; the star is
        // key-joined so a direct map-based build stays linear.
        Database dbJoined = db;
        {
            auto fieldOf = [](const Value& rec, const std::string& f) {
                for (const auto& [k, v] : rec.rec)
                    if (k == f) return v.i;
                throw EvalError("join tuple lacks attribute " + f);
            };
            std::map<long long, long long> storeCity, itemPrice;
            for (const auto& [t, m] : db.at("Stores").dict)
                storeCity[fieldOf(t, "s")] = fieldOf(t, "c");
            for (const auto& [t, m] : db.at("Items").dict)
                itemPrice[fieldOf(t, "i")] = fieldOf(t, "p");
            std::vector<std::pair<Value, Value>> q;
            for (const auto& [t, m] : db.at("Sales").dict)
                q.emplace_back(
                    Value::record({{"i", Value::integer(fieldOf(t, "i"))},
                                   {"s", Value::integer(fieldOf(t, "s"))},
                                   {"c", Value::integer(storeCity.at(fieldOf(t, "s")))},
                                   {"p", Value::integer(itemPrice.at(fieldOf(t, "i")))},
                                   {"u", Value::integer(fieldOf(t, "u"))}}),
                    m);
            dbJoined["Q"] = Value::makeDict(std::move(q));
        }

        for (long long it : a.iters) {
            std::map<std::string, long long> scannedBy;
            for (const std::string& passName : a.passes) {
                PassLevel level = parsePasses(passName);
                LRConfig cfg;
                cfg.policy = IterationPolicy{it, std::nullopt};
                cfg.materializedJoin = level == PassLevel::None;
                Program p = buildLinearRegressionProgram(s, cfg);
                const Database& useDb = cfg.materializedJoin ? dbJoined : db;

                auto t0 = Clock::now();
                Program opt = p;
                if (level >= PassLevel::HighLevel) {
                    opt = runHighLevelPipeline(p, s).final;
                    if (level >= PassLevel::Agg) opt = applyAggOpt(opt, s);
                }
                std::pair<Value, CostStats> r;
                if (level == PassLevel::All) {
                    PhysicalPlan plan = chooseLayouts(opt, s, useDb);
                    r = execute(plan, useDb, cfg.policy);
                } else {
                    r = eval(opt, useDb, cfg.policy);
                }
                auto t1 = Clock::now();
                double ms =
                    std::chrono::duration<double, std::milli>(t1 - t0).count();

                const CostStats& st = r.second;
                csv << sales << ',' << it << ',' << passName << ',' << ms << ','
                    << st.tuplesScanned << ',' << st.arithmeticOps << ','
                    << st.dictLookups << ',' << st.dictInserts << ','
                    << st.loopIterations << '\n';
                scannedBy[passName] = st.tuplesScanned;
                std::cerr << "bench sales=" << sales << " iters=" << it
                          << " passes=" << passName << " wallMs=" << ms << "\n";
            }
            // Sanity check on the single-scan property: once the join
            // dwarfs the dimension tables, the optimized plan must scan at
            // most a fifth of what the naive plan does.
            if (scannedBy.count("none") && scannedBy.count("all") &&
                sales >= 10 * (spec.stores + spec.items)) {
                double ratio =
                    (double)scannedBy["all"] / (double)scannedBy["none"];
                if (ratio > 0.2)
                    throw EvalError("optimized/naive scan ratio " +
                                    std::to_string(ratio) + " exceeds 0.2 at sales=" +
                                    std::to_string(sales));
            }
        }
    }
    writeFile(a.outPath, csv.str());
    return 0;
}

struct GenArgs {
    GenSpec spec;
    std::string dir = ".";
};

int cmdGen(const GenArgs& a) {
    Schema s = retailSchema(a.spec);
    Database db = generateRetail(a.spec);
    exportCSV(db, s, a.dir);
    writeFile((std::filesystem::path(a.dir) / "schema.json").string(),
              schemaToJsonText(s) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ifaq: optimizing compiler and execution engine"};
    app.require_subcommand(1);

    RunArgs run;
    CLI::App* runCmd = app.add_subcommand("run", "evaluate a program against a database");
    runCmd->add_option("--program", run.program, "program source file")->required();
    runCmd->add_option("--schema", run.schema, "schema JSON file")->required();
    runCmd->add_option("--db", run.dbDir, "directory of <relation>.csv files")->required();
    runCmd->add_option("--passes", run.passes, "none|highlevel|agg|all (default all)");
    runCmd->add_option("--max-iters", run.maxIters, "loop iteration cap (default 1)");
    double eps = 0.0;
    CLI::Option* epsOpt =
        runCmd->add_option("--epsilon", eps, "Linf convergence threshold");
    runCmd->add_option("--out", run.outPath, "result JSON path (default result.json)");
    runCmd->add_option("--stats", run.statsPath, "stats JSON path (default stats.json)");

    TraceArgs trace;
    CLI::App* traceCmd =
        app.add_subcommand("trace", "dump the rewrite trace and per-stage programs");
    traceCmd->add_option("--program", trace.program, "program source file")->required();
    traceCmd->add_option("--schema", trace.schema, "schema JSON file")->required();
    traceCmd->add_option("--out", trace.outPath,
                         "trace JSON-lines path (default trace.jsonl)");
    traceCmd->add_option("--stages", trace.stagesPath,
                         "per-stage program dump path (default stdout)");

    BenchArgs bench;
    CLI::App* benchCmd =
        app.add_subcommand("bench", "sweep the regression workload, write CSV");
    benchCmd->add_option("--sales", bench.sales, "Sales cardinalities to sweep");
    benchCmd->add_option("--iters", bench.iters, "iteration counts to sweep");
    benchCmd->add_option("--passes", bench.passes, "pass levels to sweep");
    benchCmd->add_option("--seed", bench.seed, "generator seed (default 1)");
    benchCmd->add_option("--out", bench.outPath, "CSV path (default bench.csv)");

    GenArgs gen;
    CLI::App* genCmd =
        app.add_subcommand("gen", "generate a retail star database and schema");
    genCmd->add_option("--sales", gen.spec.sales, "Sales tuple count (default 0)");
    genCmd->add_option("--items", gen.spec.items, "Items tuple count (default 50)");
    genCmd->add_option("--stores", gen.spec.stores, "Stores tuple count (default 10)");
    genCmd->add_option("--seed", gen.spec.seed, "generator seed (default 1)");
    genCmd->add_option("--dir", gen.dir, "output directory (default .)")->required();

    CLI11_PARSE(app, argc, argv);
    if (epsOpt->count()) run.epsilon = eps;

    try {
        if (runCmd->parsed()) return cmdRun(run);
        if (traceCmd->parsed()) return cmdTrace(trace);
        if (genCmd->parsed()) return cmdGen(gen);
        return cmdBench(bench);
    } catch (const ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitParse;
    } catch (const SpecializeError& e) {
        std::cerr << e.what() << "\n";
        return kExitType;
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kExitType;
    } catch (const PlanError& e) {
        std::cerr << "plan error: " << e.what() << "\n";
        return kExitPlan;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

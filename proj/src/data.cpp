#include "ifaq/data.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "ifaq/rng.hpp"

namespace ifaq {

namespace {

Value intTuple(std::vector<std::pair<std::string, long long>> fs) {
    std::vector<std::pair<std::string, Value>> rec;
    rec.reserve(fs.size());
    for (auto& [k, v] : fs) rec.emplace_back(k, Value::integer(v));
    return Value::record(std::move(rec));
}

long long uniformIn(SplitMix64& rng, long long lo, long long hi) {
    return lo + rng.below(hi - lo + 1);
}

}  // namespace

Schema retailSchema(const GenSpec& spec) {
    Schema s;
    s.relations = {{"Sales",
                    {{"i", ScalarType::Int}, {"s", ScalarType::Int}, {"u", ScalarType::Int}},
                    spec.sales},
                   {"Stores", {{"s", ScalarType::Int}, {"c", ScalarType::Int}}, spec.stores},
                   {"Items", {{"i", ScalarType::Int}, {"p", ScalarType::Int}}, spec.items}};
    s.featureSets["features"] = {"i", "s", "c", "p"};
    s.label = "u";
    JoinTree jt;
    jt.root = "Sales";
    jt.edges = {{"Sales", "Stores", {"s"}}, {"Sales", "Items", {"i"}}};
    s.joinTree = jt;
    return s;
}

Database generateRetail(const GenSpec& spec) {
    if (spec.sales < 0 || spec.items < 0 || spec.stores < 0)
        throw std::runtime_error("negative tuple count");
    long long unitsRange = spec.unitsMax - spec.unitsMin + 1;
    if (spec.sales > 0 && spec.sales > spec.items * spec.stores * unitsRange)
        throw std::runtime_error("domain too small for requested distinct Sales tuples");

    SplitMix64 rng(spec.seed);
    Database db;

    std::vector<std::pair<Value, Value>> items;
    for (long long i = 1; i <= spec.items; ++i)
        items.emplace_back(
            intTuple({{"i", i}, {"p", uniformIn(rng, spec.priceMin, spec.priceMax)}}),
            Value::integer(1));
    db["Items"] = Value::makeDict(std::move(items));

    std::vector<std::pair<Value, Value>> stores;
    for (long long s = 1; s <= spec.stores; ++s)
        stores.emplace_back(
            intTuple({{"s", s}, {"c", uniformIn(rng, 1, std::max<long long>(spec.cities, 1))}}),
            Value::integer(1));
    db["Stores"] = Value::makeDict(std::move(stores));

    std::set<std::tuple<long long, long long, long long>> seen;
    std::vector<std::pair<Value, Value>> sales;
    while ((long long)sales.size() < spec.sales) {
        long long i = 1 + rng.below(spec.items);
        long long s = 1 + rng.below(spec.stores);
        long long u = uniformIn(rng, spec.unitsMin, spec.unitsMax);
        if (!seen.insert({i, s, u}).second) continue;
        sales.emplace_back(intTuple({{"i", i}, {"s", s}, {"u", u}}), Value::integer(1));
    }
    db["Sales"] = Value::makeDict(std::move(sales));
    return db;
}

namespace {

std::string cellOf(const Value& v) {
    switch (v.kind) {
        case Value::Kind::Int: return std::to_string(v.i);
        case Value::Kind::Real: {
            std::ostringstream os;
            os << v.r;
            return os.str();
        }
        case Value::Kind::Bool: return v.b ? "true" : "false";
        case Value::Kind::Str: return v.s;
        default: throw std::runtime_error("non-scalar cell in relation tuple");
    }
}

Value parseCell(const std::string& cell, ScalarType t, const std::string& file,
                std::size_t row, const std::string& col) {
    auto fail = [&]() -> std::runtime_error {
        return std::runtime_error("unparseable cell in " + file + " row " +
                                  std::to_string(row) + " column " + col + ": '" + cell +
                                  "'");
    };
    try {
        switch (t) {
            case ScalarType::Int: {
                std::size_t used = 0;
                long long v = std::stoll(cell, &used);
                if (used != cell.size()) throw fail();
                return Value::integer(v);
            }
            case ScalarType::Real: {
                std::size_t used = 0;
                double v = std::stod(cell, &used);
                if (used != cell.size()) throw fail();
                return Value::real(v);
            }
            case ScalarType::Bool:
                if (cell == "true" || cell == "1") return Value::boolean(true);
                if (cell == "false" || cell == "0") return Value::boolean(false);
                throw fail();
            case ScalarType::String:
                return Value::str(cell);
        }
    } catch (const std::invalid_argument&) {
        throw fail();
    } catch (const std::out_of_range&) {
        throw fail();
    }
    throw fail();
}

std::vector<std::string> splitComma(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace

void exportCSV(const Database& db, const Schema& schema, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& r : schema.relations) {
        std::ofstream out(std::filesystem::path(dir) / (r.name + ".csv"),
                          std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + r.name + ".csv in " + dir);
        for (std::size_t a = 0; a < r.attrs.size(); ++a)
            out << (a ? "," : "") << r.attrs[a].name;
        out << '\n';
        auto it = db.find(r.name);
        if (it == db.end()) continue;
        for (const auto& [t, m] : it->second.dict) {
            std::string line;
            for (std::size_t a = 0; a < r.attrs.size(); ++a) {
                const Value* cell = nullptr;
                for (const auto& [f, v] : t.rec)
                    if (f == r.attrs[a].name) cell = &v;
                if (!cell)
                    throw std::runtime_error("tuple in " + r.name + " lacks attribute " +
                                             r.attrs[a].name);
                line += (a ? "," : "") + cellOf(*cell);
            }
            for (long long k = 0; k < m.i; ++k) out << line << '\n';
        }
    }
}

Database loadCSV(const std::string& dir, const Schema& schema) {
    Database db;
    for (const auto& r : schema.relations) {
        std::string file = r.name + ".csv";
        std::ifstream in(std::filesystem::path(dir) / file, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + file + " in " + dir);

        std::string line;
        if (!std::getline(in, line)) throw std::runtime_error(file + " is empty");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> header = splitComma(line);
        if (header.size() != r.attrs.size())
            throw std::runtime_error(file + " header has " + std::to_string(header.size()) +
                                     " columns, schema declares " +
                                     std::to_string(r.attrs.size()));
        for (std::size_t a = 0; a < r.attrs.size(); ++a)
            if (header[a] != r.attrs[a].name)
                throw std::runtime_error(file + " header column " + std::to_string(a + 1) +
                                         " is '" + header[a] + "', expected '" +
                                         r.attrs[a].name + "'");

        std::map<Value, long long, bool (*)(const Value&, const Value&)> counts(valueLess);
        std::size_t row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            std::vector<std::string> cells = splitComma(line);
            if (cells.size() != r.attrs.size())
                throw std::runtime_error(file + " row " + std::to_string(row) + " has " +
                                         std::to_string(cells.size()) + " cells, expected " +
                                         std::to_string(r.attrs.size()));
            std::vector<std::pair<std::string, Value>> rec;
            for (std::size_t a = 0; a < r.attrs.size(); ++a)
                rec.emplace_back(r.attrs[a].name,
                                 parseCell(cells[a], r.attrs[a].type, file, row,
                                           r.attrs[a].name));
            ++counts[Value::record(std::move(rec))];
        }
        std::vector<std::pair<Value, Value>> tuples;
        tuples.reserve(counts.size());
        for (auto& [t, m] : counts) tuples.emplace_back(t, Value::integer(m));
        db[r.name] = Value::makeDict(std::move(tuples));
    }
    return db;
}

}  // namespace ifaq

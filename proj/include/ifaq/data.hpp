#pragma once

#include <cstdint>
#include <string>

#include "ifaq/schema.hpp"

namespace ifaq {

// Synthetic retail star: Sales(i, s, u), Stores(s, c), Items(i, p). Sales
// references every item and store by key, so the join has exactly |Sales|
// tuples. Generation uses splitmix64 (see rng.hpp) and is byte-identical for
// a fixed seed on every platform.
struct GenSpec {
    std::uint64_t seed = 1;
    long long sales = 0;
    long long items = 50;
    long long stores = 10;
    long long cities = 5;
    long long priceMin = 1, priceMax = 100;  // Items.p, inclusive
    long long unitsMin = 1, unitsMax = 50;   // Sales.u, inclusive
};

// Schema for the generated star, with declared cardinalities from the spec,
// join tree rooted at Sales, features {i, s, c, p}, label u.
Schema retailSchema(const GenSpec& spec);

// All multiplicities 1 (Sales tuples are distinct triples; throws when the
// (i, s, u) domain cannot hold the requested count).
Database generateRetail(const GenSpec& spec);

// One <relation>.csv per relation: comma separated, \n line endings, header
// row of attribute names, one line per tuple and per unit of multiplicity.
void exportCSV(const Database& db, const Schema& schema, const std::string& dir);

// Inverse of exportCSV; duplicate rows accumulate multiplicity. Cells are
// coerced per the schema attribute types; errors report row and column.
Database loadCSV(const std::string& dir, const Schema& schema);

}  // namespace ifaq

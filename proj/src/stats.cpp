#include "ifaq/stats.hpp"

#include "json.hpp"

namespace ifaq {

std::string CostStats::toJson() const {
    nlohmann::ordered_json j;
    j["tuplesScanned"] = tuplesScanned;
    j["arithmeticOps"] = arithmeticOps;
    j["dictLookups"] = dictLookups;
    j["dictInserts"] = dictInserts;
    j["loopIterations"] = loopIterations;
    return j.dump();
}

}  // namespace ifaq

#pragma once

#include "mfg/analysis.hpp"
#include "mfg/lq_oracle.hpp"

#include <json.hpp>

namespace mfg {

using Json = nlohmann::ordered_json;

Json to_json(const AssumptionConstants& c);
Json to_json(const SolveReport& report, bool with_wall_time = true);
Json to_json(const AssumptionReport& report);
Json to_json(const MonotonicityReport& report);
Json to_json(const JacobianFlowResult& result);
Json to_json(const BlowupReport& report);
Json to_json(const CounterexampleReport& report);
Json to_json(const MeanBvpSolution& solution);

Json matrix_json(const Mat& m);

} // namespace mfg

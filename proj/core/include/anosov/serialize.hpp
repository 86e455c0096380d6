#pragma once

// JSON (de)serialization for every public type. Integer matrices travel as
// decimal strings so they stay exact; everything floating rides on the JSON
// number round-trip.

#include <json.hpp>

#include "anosov/engine.hpp"

namespace anosov {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

Json to_json(const OrderedSpectrum& s);
OrderedSpectrum spectrum_from_json(const Json& j, double tol = kSpectrumTol);

Json matrix_to_json(const std::vector<long long>& m, int d);
std::pair<std::vector<long long>, int> matrix_from_json(const Json& j);

Json to_json(const HyperbolicAutomorphism& h);
HyperbolicAutomorphism automorphism_from_json(const Json& j);

Json to_json(const ExponentPattern& p);
Json to_json(const LatticePolynomial& p);

Json to_json(const BumpProfile& p);
BumpProfile profile_from_json(const Json& j);

Json to_json(const ModelDeformation& m);
ModelDeformation deformation_from_json(const Json& j);

Json to_json(const ConeConstants& c);
ConeConstants cones_from_json(const Json& j);

Json to_json(const ChartedBall& b);
ChartedBall ball_from_json(const Json& j);

Json to_json(const DampingParameters& p);
DampingParameters damping_from_json(const Json& j);

Json to_json(const PerturbedMap& f);
PerturbedMap map_from_json(const Json& j);

Json to_json(const EstimatorConfig& c);
EstimatorConfig estimator_from_json(const Json& j);

Json to_json(const SpectrumEstimate& e);

Json to_json(const TargetReport& r);
Json to_json(const AnosovReport& r);
Json to_json(const PlacementResult& r);
Json to_json(const DampingReport& r);
Json to_json(const ConeContractionReport& r);
Json to_json(const PsiReport& r);
Json to_json(const ShiftPrediction& p);
Json to_json(const MeasuredShift& m);
Json to_json(const StructuralZeroReport& r);
Json to_json(const BoundaryReport& r);
Json to_json(const SteeringStep& s);
Json to_json(const SteeringPlan& p);

}  // namespace anosov

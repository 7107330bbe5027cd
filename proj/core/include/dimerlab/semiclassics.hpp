#pragma once
// Semiclassical requantization of invariant tubes: action quantization by
// bisection along a ray from the island center, the time-contour action with
// its integer curve winding removed, quasienergy rules on the sub-Brillouin
// zone, and Husimi-based matching of Floquet states to tubes.

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dimerlab/meanfield.hpp"
#include "dimerlab/params.hpp"
#include "dimerlab/propagate.hpp"

namespace dimerlab {

// Shoelace action of a closed section polyline, returned positive. Rejects
// degenerate and self-intersecting input.
double polygon_action(const std::vector<PhasePoint>& polyline);

// Re-traces the curve with doubled return counts until the action settles to
// a relative change below 1e-5. The refined curve replaces the input.
double contour_action(const MeanFieldParams& mf, InvariantCurve& curve,
                      const TraceOptions& opt = {});

struct QuantizedTube {
  int n = 0;  // transverse quantum number
  int k = 1;  // period multiplicity
  double action = 0.0;
  double target_action = 0.0;      // 2 pi hbar_eff (n + 1/2), Maslov index 2
  double seed_displacement = 0.0;  // ray parameter of the quantized curve
  InvariantCurve curve;
  // Filled by semiclassical_quasienergy:
  double eps_semiclassical = std::numeric_limits<double>::quiet_NaN();
  int photon_index = 0;
  double subzone = std::numeric_limits<double>::quiet_NaN();
};

struct TubeSearchResult {
  int n = 0;
  bool fits = false;
  std::optional<QuantizedTube> tube;
  std::string note;
};

struct QuantizeOptions {
  TraceOptions trace;
  double rel_tol = 2e-3;  // action tolerance relative to the target
  int max_bisections = 90;
  PhasePoint ray{1.0, 0.0};  // direction (p, phi) away from the center
  double s_init = 0.015;     // first ray displacement probed
  double s_max = 1.2;        // absolute search bound
};

// Quantizes curves of action 2 pi hbar_eff (n + 1/2) around an elliptic
// period-k point. Entries that exceed the island capacity come back with
// fits = false and a note instead of failing the whole search.
std::vector<TubeSearchResult> quantize_island(const MeanFieldParams& mf, PhasePoint center,
                                              int k, const DimerParams& params,
                                              const std::vector<int>& n_list,
                                              const QuantizeOptions& opt = {});

// Largest traceable invariant curve around an elliptic period-k point,
// found by growing the ray displacement until tracing fails and squeezing
// the failure boundary. Serves as the island's bounding contour.
InvariantCurve island_boundary(const MeanFieldParams& mf, PhasePoint center, int k,
                               const QuantizeOptions& opt = {});

// Pieces of the action of the closed time contour: flow integral of
// p dphi - H dtau over k periods from a curve point, closure along the
// section polyline, and the winding times the curve action that the closure
// convention removes. "pure" is invariant under the closing direction.
struct ContourActionParts {
  double flow = 0.0;
  double closing = 0.0;
  int winding = 0;            // net clockwise turns about the tube core
  double curve_action = 0.0;  // clockwise-oriented section action, positive
  double pure = 0.0;          // flow + closing - winding * curve_action
};

ContourActionParts time_contour_action(const MeanFieldParams& mf, const InvariantCurve& curve,
                                       const FlowOptions& opt = {});

// Quasienergy of a quantized tube in mean-field energy units, well-defined
// modulo the sub-Brillouin width. Records the result in the tube.
double semiclassical_quasienergy(const MeanFieldParams& mf, const DimerParams& params,
                                 QuantizedTube& tube, int photon_index = 0,
                                 const FlowOptions& opt = {});

// Exact quasienergy (rate units) mapped to mean-field energy units: the
// affine rescaling that turns the many-body Hamiltonian into the classical
// one, hbar_eff * eps / Omega - alpha * (1 - hbar_eff).
double quasienergy_to_meanfield_units(const DimerParams& params, double quasienergy);

// 2 pi hbar_eff / (k dtau): the quasienergy ambiguity of a period-k tube.
double subzone_width(const DimerParams& params, int k);

struct TubeAssignment {
  int tube_index = -1;
  int state_index = -1;
  double score = 0.0;  // mean Husimi value along the tube polyline
  double runner_up = 0.0;
  bool ambiguous = false;  // runner-up within 5% of the winning score
  double eps_exact = std::numeric_limits<double>::quiet_NaN();  // mean-field units
  double eps_semiclassical = std::numeric_limits<double>::quiet_NaN();
  double residual = std::numeric_limits<double>::quiet_NaN();  // sub-zone circular metric
};

// Greedy best-score assignment of one Floquet state per tube. Tubes missing
// a quasienergy record get one computed with photon index 0.
std::vector<TubeAssignment> match_states_to_tubes(const DimerParams& params,
                                                  const FloquetSolution& fs,
                                                  std::vector<QuantizedTube>& tubes,
                                                  const MeanFieldParams& mf);

// Ray-casting test against the closed polyline.
bool point_in_polygon(const std::vector<PhasePoint>& polygon, PhasePoint point);

} // namespace dimerlab

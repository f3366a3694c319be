#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "turbkeps/solver.hpp"

namespace turbkeps {

/// INI-style configuration. Sections and keys (defaults in parentheses):
///
///   [model]       d (2) alpha (3) beta (1) eta zeta gamma theta (0)
///                 cT CT cD CD cP CP cEps CEps (1) cDa cFo (1) C0 (1) T_final (1)
///                 override_admissibility (false)
///   [domain]      mode = torus|box (torus)  Lx Ly (1)  N (16)
///   [truncation]  n (8) j (16) l (16) cutoff (true) positivity = monitor|floor (monitor)
///   [integrator]  rel_tol (1e-8) abs_tol (1e-12) max_dt (0.05) dt_init (1e-4) max_steps (5000000)
///   [initial]     u0 = zero|mode|file (zero) u0_mode (0) u0_amplitude (0) u0_file
///                 k0 = constant|cosine|file (constant) k0_value (1) k0_amplitude (0) k0_file
///                 mollify (true)
///   [forcing]     kind = zero|constant|mode (zero) gx gy (0) mode (0) amplitude (0)
///   [output]      uniform_intervals (512) geometric_levels (12) extra_times (empty list)
///                 energy tke_l1 gradient transport ic weak_residual (true)
///   [sweep]       axis = n|j|l  levels = comma-separated list (section optional)
///
/// Lines are `key = value`; `#` or `;` start a comment. Unknown sections or
/// keys, duplicates and malformed values are errors that name the line.
struct ConfigWarnings {
    std::vector<std::string> messages;
    bool admissibility_overridden = false;
};

/// Parses, validates and pre-checks admissibility. An inadmissible parameter
/// set is rejected with Error(Config) naming the condition unless
/// override_admissibility is set in the text or `force_override` is true.
RunConfig parse_config(std::string_view text, bool force_override = false, ConfigWarnings* warnings = nullptr);

/// Every key, with doubles in round-trip precision.
std::string serialize_config(const RunConfig& cfg);

/// Error(Config) describing the first violated condition, including the
/// exponent it is measured against.
void require_admissible(const ModelParameters& params);

}  // namespace turbkeps

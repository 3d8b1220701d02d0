#pragma once

// Reference prepare-and-measure fragments with known embeddability.

#include "gptomo/linalg.hpp"

namespace gptomo::ctx {

struct Fragment {
    Matrix states;   ///< rows
    Matrix effects;  ///< columns, unit first, zero second
    Vector unit;
};

/// Classical d-level system: simplex vertices as states, all 0/1 response vectors as effects.
Fragment classical_fragment(int d);

/// Six stabilizer states and the stabilizer projectors, in the frame (1, x, y, z).
Fragment stabilizer_fragment();

/// Six stabilizer states with every effect of their dual cube, (1 +- x +- y +- z)/2 and complements.
Fragment octahedron_cube_fragment();

/// Unit vectors of a geodesic icosphere: 12, 42, 162, ... points for level 0, 1, 2, ...
/// Points of lower levels come first, so refinements are nested.
Matrix icosphere(int level);

/// Pure states on the icosphere and projective effects along the same directions.
Fragment icosphere_fragment(int level);

}  // namespace gptomo::ctx

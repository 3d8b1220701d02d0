#include "gptomo/fragments.hpp"

#include "gptomo/error.hpp"

#include <array>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

namespace gptomo::ctx {

namespace {

Vector unit_effect(Eigen::Index k) {
    Vector u = Vector::Zero(k);
    u(0) = 1.0;
    return u;
}

// States (1, x) and projective effects (1 + n.x)/2 with complements for every direction.
Fragment bloch_fragment(const Matrix& state_dirs, const Matrix& effect_dirs) {
    Fragment f;
    f.unit = unit_effect(4);
    f.states.resize(state_dirs.rows(), 4);
    f.states.col(0).setOnes();
    f.states.rightCols(3) = state_dirs;
    const Eigen::Index n = effect_dirs.rows();
    f.effects.resize(4, 2 * n + 2);
    f.effects.col(0) = f.unit;
    f.effects.col(1).setZero();
    for (Eigen::Index j = 0; j < n; ++j) {
        Vector e(4);
        e << 0.5, 0.5 * effect_dirs.row(j).transpose();
        f.effects.col(2 + j) = e;
        f.effects.col(2 + n + j) = f.unit - e;
    }
    return f;
}

Matrix axes() {
    Matrix v(6, 3);
    v << 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1;
    return v;
}

}  // namespace

Fragment classical_fragment(int d) {
    if (d < 1 || d > 16) throw InvalidArgument("classical fragment dimension out of range");
    Fragment f;
    f.unit = Vector::Ones(d);
    f.states = Matrix::Identity(d, d);
    const int count = 1 << d;
    f.effects.resize(d, count);
    // Unit first, zero second, then the remaining 0/1 vectors.
    f.effects.col(0) = f.unit;
    f.effects.col(1).setZero();
    Eigen::Index col = 2;
    for (int mask = 1; mask < count - 1; ++mask) {
        for (int c = 0; c < d; ++c) f.effects(c, col) = (mask >> c) & 1;
        ++col;
    }
    return f;
}

Fragment stabilizer_fragment() { return bloch_fragment(axes(), axes()); }

Fragment octahedron_cube_fragment() {
    Matrix corners(8, 3);
    for (int i = 0; i < 8; ++i) corners.row(i) << 2 * (i & 1) - 1, 2 * (i >> 1 & 1) - 1, 2 * (i >> 2 & 1) - 1;
    // Only four corners are needed; the other four are their complements.
    Matrix half(4, 3);
    int r = 0;
    for (int i = 0; i < 8; ++i)
        if (corners(i, 2) > 0) half.row(r++) = corners.row(i);
    return bloch_fragment(axes(), half);
}

Matrix icosphere(int level) {
    if (level < 0 || level > 5) throw InvalidArgument("icosphere level out of range");
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> pts = {{-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi}, {0, 1, phi},
                             {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1},  {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto& p : pts) p.normalize();
    std::vector<std::array<int, 3>> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            pts.push_back((pts[static_cast<std::size_t>(a)] + pts[static_cast<std::size_t>(b)]).normalized());
            const int idx = static_cast<int>(pts.size()) - 1;
            mid.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        for (const auto& f : faces) {
            const int a = midpoint(f[0], f[1]);
            const int b = midpoint(f[1], f[2]);
            const int c = midpoint(f[2], f[0]);
            next.push_back({f[0], a, c});
            next.push_back({f[1], b, a});
            next.push_back({f[2], c, b});
            next.push_back({a, b, c});
        }
        faces = std::move(next);
    }
    Matrix out(static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
    return out;
}

Fragment icosphere_fragment(int level) {
    const Matrix dirs = icosphere(level);
    return bloch_fragment(dirs, dirs);
}

}  // namespace gptomo::ctx

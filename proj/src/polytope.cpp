#include "gptomo/polytope.hpp"

#include "gptomo/lp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace gptomo::poly {

namespace {

using Bits = std::vector<std::uint64_t>;

struct Ray {
    Vector x;
    Bits zeros;  // processed constraints tight at x
};

void set_bit(Bits& b, Eigen::Index i) { b[static_cast<std::size_t>(i) / 64] |= std::uint64_t{1} << (i % 64); }

int intersect_count(const Bits& a, const Bits& b, Bits& out) {
    int count = 0;
    for (std::size_t w = 0; w < a.size(); ++w) {
        out[w] = a[w] & b[w];
        count += std::popcount(out[w]);
    }
    return count;
}

bool contains_bits(const Bits& outer, const Bits& inner) {
    for (std::size_t w = 0; w < outer.size(); ++w)
        if ((inner[w] & ~outer[w]) != 0) return false;
    return true;
}

int matrix_rank(const Matrix& m, double tol) {
    if (m.rows() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const Vector& sv = svd.singularValues();
    int r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++r;
    return r;
}

// Row order with coordinates compared on a coarse grid first, so tiny noise does not reshuffle.
std::vector<Eigen::Index> lex_order(const Matrix& rows) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(rows.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    auto key = [](double v) { return std::round(v * 1e8); };
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index p, Eigen::Index q) {
        for (Eigen::Index c = 0; c < rows.cols(); ++c) {
            const double a = key(rows(p, c));
            const double b = key(rows(q, c));
            if (a != b) return a < b;
        }
        return false;
    });
    return idx;
}

Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(idx[r]);
    return out;
}

Matrix dedupe_rows(const Matrix& m, double tol) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        bool dup = false;
        for (Eigen::Index j : keep)
            if ((m.row(i) - m.row(j)).lpNorm<Eigen::Infinity>() <= tol) {
                dup = true;
                break;
            }
        if (!dup) keep.push_back(i);
    }
    return take_rows(m, keep);
}

struct Frame {
    Vector center;
    double scale = 1.0;
};

Frame unit_frame(const Matrix& pts) {
    Frame f;
    f.center = pts.colwise().mean().transpose();
    double diam = 0.0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i) diam = std::max(diam, (pts.row(i).transpose() - f.center).norm());
    f.scale = diam > 0.0 ? 2.0 * diam : 1.0;
    return f;
}

Matrix to_frame(const Matrix& pts, const Frame& f) {
    return (pts.rowwise() - f.center.transpose()) / f.scale;
}

// Orthonormal basis of the complement of unit vector a (columns).
Matrix complement_basis(const Vector& a) {
    Eigen::HouseholderQR<Matrix> qr(a);
    const Matrix q = qr.householderQ();
    return q.rightCols(a.size() - 1);
}

double hull_area_2d(const Matrix& pts) {
    // Monotone chain hull, then shoelace.
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(pts.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](Eigen::Index p, Eigen::Index q) {
        return pts(p, 0) < pts(q, 0) || (pts(p, 0) == pts(q, 0) && pts(p, 1) < pts(q, 1));
    });
    auto cross = [&](Eigen::Index o, Eigen::Index a, Eigen::Index b) {
        return (pts(a, 0) - pts(o, 0)) * (pts(b, 1) - pts(o, 1)) - (pts(a, 1) - pts(o, 1)) * (pts(b, 0) - pts(o, 0));
    };
    std::vector<Eigen::Index> hull(2 * idx.size());
    std::size_t k = 0;
    for (auto i : idx) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], i) <= 0) --k;
        hull[k++] = i;
    }
    for (std::size_t t = idx.size() - 1, lo = k + 1; t-- > 0;) {
        const auto i = idx[t];
        while (k >= lo && cross(hull[k - 2], hull[k - 1], i) <= 0) --k;
        hull[k++] = i;
    }
    if (k < 4) return 0.0;
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < k; ++i)
        area += pts(hull[i], 0) * pts(hull[i + 1], 1) - pts(hull[i + 1], 0) * pts(hull[i], 1);
    return 0.5 * std::abs(area);
}

// Volume of the hull of full-dimensional points already in a unit frame.
double volume_rec(const Matrix& pts, double tol) {
    const Eigen::Index d = pts.cols();
    if (d == 1) return pts.maxCoeff() - pts.minCoeff();
    if (d == 2) return hull_area_2d(pts);
    const HPolytope h = v_to_h(VPolytope{pts}, tol);
    const Vector c = pts.colwise().mean().transpose();
    double total = 0.0;
    for (Eigen::Index f = 0; f < h.size(); ++f) {
        const Vector a = h.a.row(f).transpose();
        const double height = h.b(f) - a.dot(c);
        std::vector<Eigen::Index> on;
        for (Eigen::Index i = 0; i < pts.rows(); ++i)
            if (std::abs(a.dot(pts.row(i).transpose()) - h.b(f)) <= 10.0 * tol) on.push_back(static_cast<Eigen::Index>(i));
        if (static_cast<Eigen::Index>(on.size()) < d) continue;
        const Matrix face = take_rows(pts, on) * complement_basis(a);
        if (affine_dimension(face, tol) < d - 1) continue;
        total += height * volume_rec(face, tol) / static_cast<double>(d);
    }
    return total;
}

}  // namespace

Matrix extreme_rays(const Matrix& a_in, double tol) {
    constexpr double kMergeTol = 1e-7;
    const Eigen::Index d = a_in.cols();
    std::vector<Eigen::Index> live;
    for (Eigen::Index i = 0; i < a_in.rows(); ++i)
        if (a_in.row(i).norm() > 0.0) live.push_back(i);
    Matrix a(static_cast<Eigen::Index>(live.size()), d);
    for (std::size_t r = 0; r < live.size(); ++r) {
        const auto row = a_in.row(live[r]);
        a.row(static_cast<Eigen::Index>(r)) = row / row.norm();
    }
    const Eigen::Index n = a.rows();
    const std::size_t words = static_cast<std::size_t>(n / 64 + 1);

    // Initial simplicial cone from d well-conditioned rows: greedy largest residual after projection.
    // Clustered leading rows (sorted input) would otherwise give an ill-conditioned start.
    std::vector<Eigen::Index> basis;
    Matrix resid = a;
    while (static_cast<Eigen::Index>(basis.size()) < d) {
        Eigen::Index best = 0;
        const double norm = resid.rowwise().norm().maxCoeff(&best);
        if (norm <= 1e-8) break;
        const Vector dir = resid.row(best).transpose() / norm;
        resid -= (resid * dir) * dir.transpose();
        basis.push_back(best);
    }
    if (static_cast<Eigen::Index>(basis.size()) < d)
        throw DegenerateGeometry("constraint system does not have full column rank; the cone is not pointed");
    std::sort(basis.begin(), basis.end());

    Matrix b(d, d);
    for (Eigen::Index r = 0; r < d; ++r) b.row(r) = a.row(basis[static_cast<std::size_t>(r)]);
    const Matrix inv = b.fullPivLu().inverse();
    std::vector<Ray> rays;
    for (Eigen::Index j = 0; j < d; ++j) {
        Ray ray{inv.col(j).normalized(), Bits(words, 0)};
        for (Eigen::Index r = 0; r < d; ++r)
            if (r != j) set_bit(ray.zeros, basis[static_cast<std::size_t>(r)]);
        rays.push_back(std::move(ray));
    }

    std::vector<bool> in_basis(static_cast<std::size_t>(n), false);
    for (auto i : basis) in_basis[static_cast<std::size_t>(i)] = true;
    std::vector<Eigen::Index> processed(basis.begin(), basis.end());

    Bits common(words, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (in_basis[static_cast<std::size_t>(i)]) continue;
        const Vector row = a.row(i).transpose();
        std::vector<std::size_t> plus, minus, zero;
        std::vector<double> val(rays.size());
        for (std::size_t r = 0; r < rays.size(); ++r) {
            val[r] = row.dot(rays[r].x);
            if (val[r] > tol) plus.push_back(r);
            else if (val[r] < -tol) minus.push_back(r);
            else zero.push_back(r);
        }
        if (minus.empty()) {
            for (auto r : zero) set_bit(rays[r].zeros, i);
            processed.push_back(i);
            continue;
        }
        std::vector<Ray> next;
        next.reserve(plus.size() + zero.size() + plus.size() * 2);
        for (auto r : plus) next.push_back(rays[r]);
        for (auto r : zero) {
            next.push_back(rays[r]);
            set_bit(next.back().zeros, i);
        }
        for (auto p : plus) {
            for (auto m : minus) {
                const int cnt = intersect_count(rays[p].zeros, rays[m].zeros, common);
                if (cnt < d - 2) continue;
                // Combinatorial test: no third ray may be tight on every common constraint.
                bool dominated = false;
                for (std::size_t r = 0; r < rays.size() && !dominated; ++r) {
                    if (r == p || r == m) continue;
                    dominated = contains_bits(rays[r].zeros, common);
                }
                if (dominated) continue;
                if (d > 2) {
                    Matrix tight(cnt, d);
                    Eigen::Index t = 0;
                    for (Eigen::Index c = 0; c < n; ++c)
                        if (common[static_cast<std::size_t>(c) / 64] >> (c % 64) & 1u) tight.row(t++) = a.row(c);
                    if (matrix_rank(tight, 1e-9) != d - 2) continue;
                }
                Ray ray{(val[p] * rays[m].x - val[m] * rays[p].x).normalized(), common};
                // Near-degenerate inputs can leave the new ray tight on constraints outside the
                // common set; evaluating keeps zero sets consistent with the numerics.
                for (Eigen::Index c : processed)
                    if (std::abs(a.row(c).dot(ray.x)) <= tol) set_bit(ray.zeros, c);
                set_bit(ray.zeros, i);
                // A new ray within merge distance of a kept one is the same ray up to rounding;
                // keeping both would let each dominate the other's genuine adjacencies.
                bool merged = false;
                for (auto& other : next)
                    if ((other.x - ray.x).lpNorm<Eigen::Infinity>() <= kMergeTol) {
                        for (std::size_t w = 0; w < words; ++w) other.zeros[w] |= ray.zeros[w];
                        merged = true;
                        break;
                    }
                if (!merged) next.push_back(std::move(ray));
            }
        }
        rays = std::move(next);
        processed.push_back(i);
    }

    Matrix out(static_cast<Eigen::Index>(rays.size()), d);
    for (std::size_t r = 0; r < rays.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = rays[r].x.transpose();
    return dedupe_rows(out, tol);
}

std::vector<Eigen::Index> extreme_point_indices(const Matrix& points, double tol) {
    const Eigen::Index n = points.rows();
    const Eigen::Index d = points.cols();
    if (n == 0) throw InvalidArgument("remove_interior needs at least one point");
    const Matrix pts = to_frame(points, unit_frame(points));
    std::vector<Eigen::Index> active(static_cast<std::size_t>(n));
    std::iota(active.begin(), active.end(), 0);
    lp::Options opt;
    opt.feasibility_tol = tol;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<Eigen::Index> others;
        for (auto j : active)
            if (j != i) others.push_back(j);
        if (others.empty()) continue;
        lp::Problem prob;
        const auto cols = static_cast<Eigen::Index>(others.size());
        prob.a.resize(d + 1, cols);
        for (Eigen::Index c = 0; c < cols; ++c) {
            prob.a.col(c).head(d) = pts.row(others[static_cast<std::size_t>(c)]).transpose();
            prob.a(d, c) = 1.0;
        }
        prob.b.resize(d + 1);
        prob.b.head(d) = pts.row(i).transpose();
        prob.b(d) = 1.0;
        prob.c = Vector::Zero(cols);
        if (lp::solve(prob, opt).status == lp::Status::optimal)
            active.erase(std::find(active.begin(), active.end(), i));
    }
    return active;
}

VPolytope remove_interior(const Matrix& points, double tol) {
    return VPolytope{take_rows(points, extreme_point_indices(points, tol))};
}

VPolytope h_to_v(const HPolytope& h, double tol) {
    const Eigen::Index d = h.dimension();
    if (h.b.size() != h.a.rows()) throw InvalidArgument("H-representation has mismatched sizes");
    Eigen::FullPivLU<Matrix> lu(h.a);
    lu.setThreshold(1e-10);
    if (h.a.rows() == 0 || lu.rank() < d) {
        const Matrix kernel = h.a.rows() == 0 ? Matrix(Matrix::Identity(d, d)) : Matrix(lu.kernel());
        throw UnboundedPolytope("inequalities leave a line unconstrained", kernel.col(0));
    }
    Matrix cone(h.a.rows() + 1, d + 1);
    cone.topLeftCorner(h.a.rows(), 1) = h.b;
    cone.topRightCorner(h.a.rows(), d) = -h.a;
    cone.row(h.a.rows()).setZero();
    cone(h.a.rows(), 0) = 1.0;
    const Matrix rays = extreme_rays(cone, tol);
    std::vector<Vector> verts;
    for (Eigen::Index r = 0; r < rays.rows(); ++r) {
        const double t = rays(r, 0);
        if (t > 1e-12) {
            verts.emplace_back(rays.row(r).tail(d).transpose() / t);
        } else {
            throw UnboundedPolytope("inequalities describe an unbounded region", rays.row(r).tail(d).transpose());
        }
    }
    if (verts.empty()) throw Infeasible("inequalities describe an empty region");
    Matrix v = dedupe_rows(rows_to_matrix(verts, d), tol);
    return VPolytope{take_rows(v, lex_order(v))};
}

HPolytope canonicalize(const HPolytope& h, double tol) {
    Matrix rows(h.a.rows(), h.a.cols() + 1);
    Eigen::Index kept = 0;
    const double top = h.a.rows() > 0 ? h.a.rowwise().norm().maxCoeff() : 0.0;
    for (Eigen::Index i = 0; i < h.a.rows(); ++i) {
        const double n = h.a.row(i).norm();
        if (n <= 1e-12 * top) {
            if (h.b(i) < -tol) throw Infeasible("inequality 0 <= b with b < 0");
            continue;
        }
        rows.row(kept).head(h.a.cols()) = h.a.row(i) / n;
        rows(kept, h.a.cols()) = h.b(i) / n;
        ++kept;
    }
    rows.conservativeResize(kept, Eigen::NoChange);
    rows = dedupe_rows(rows, tol);
    rows = take_rows(rows, lex_order(rows));
    return HPolytope{rows.leftCols(h.a.cols()), rows.col(h.a.cols())};
}

int affine_dimension(const Matrix& points, double tol) {
    if (points.rows() <= 1) return 0;
    const Frame f = unit_frame(points);
    const Matrix centered = to_frame(points, f);
    return matrix_rank(centered, tol * std::sqrt(static_cast<double>(points.rows())));
}

HPolytope v_to_h(const VPolytope& v, double tol) {
    const Eigen::Index d = v.dimension();
    if (affine_dimension(v.vertices, tol) < d)
        throw DegenerateGeometry("points do not span the ambient space");
    const Frame f = unit_frame(v.vertices);
    const Matrix pts = to_frame(v.vertices, f);
    Matrix gen(pts.rows(), d + 1);
    gen.col(0).setOnes();
    gen.rightCols(d) = pts;
    const Matrix facets = extreme_rays(gen, tol);
    // h0 + h'.y >= 0 with y = (x - c)/s  <=>  -h'.x <= h0 s - h'.c
    HPolytope h;
    h.a = -facets.rightCols(d);
    h.b = facets.col(0) * f.scale + h.a * f.center;
    return canonicalize(h, tol);
}

VPolytope consistent_dual(const Matrix& generators, const std::optional<Vector>& normalization, double tol) {
    const Eigen::Index k = generators.cols();
    Matrix basis;
    Vector offset;
    if (normalization) {
        const Vector& u = *normalization;
        if (u.size() != k || u.norm() == 0.0) throw InvalidArgument("normalization has the wrong size or is zero");
        offset = u / u.squaredNorm();
        Vector axis = Vector::Zero(k);
        axis(0) = 1.0;
        if ((u.normalized() - axis).norm() < 1e-15) {
            basis = Matrix::Identity(k, k).rightCols(k - 1);
        } else {
            basis = complement_basis(u.normalized());
        }
    } else {
        basis = Matrix::Identity(k, k);
        offset = Vector::Zero(k);
    }
    const Eigen::Index d = basis.cols();
    const Eigen::Index g = generators.rows();
    HPolytope h;
    h.a.resize(2 * g, d);
    h.b.resize(2 * g);
    const Matrix gb = generators * basis;
    const Vector go = generators * offset;
    h.a.topRows(g) = -gb;
    h.b.head(g) = go;
    h.a.bottomRows(g) = gb;
    h.b.tail(g) = Vector::Ones(g) - go;
    const VPolytope low = h_to_v(canonicalize(h, tol), tol);
    Matrix verts = (low.vertices * basis.transpose()).rowwise() + offset.transpose();
    return VPolytope{verts};
}

bool contains(const VPolytope& p, const Vector& x, double tol) {
    const Eigen::Index n = p.size();
    const Eigen::Index d = p.dimension();
    if (n == 0 || x.size() != d) return false;
    lp::Problem prob;
    prob.a = Matrix::Zero(d + 1, n + 2 * d);
    prob.a.topLeftCorner(d, n) = p.vertices.transpose();
    prob.a.block(0, n, d, d) = Matrix::Identity(d, d);
    prob.a.block(0, n + d, d, d) = -Matrix::Identity(d, d);
    prob.a.row(d).head(n).setOnes();
    prob.b.resize(d + 1);
    prob.b.head(d) = x;
    prob.b(d) = 1.0;
    prob.c = Vector::Zero(n + 2 * d);
    prob.c.tail(2 * d).setOnes();
    const auto r = lp::solve(prob);
    return r.status == lp::Status::optimal && r.objective <= tol;
}

double volume(const VPolytope& v, double tol) {
    const Eigen::Index d = v.dimension();
    if (v.size() <= d || affine_dimension(v.vertices, tol) < d) return 0.0;
    const Frame f = unit_frame(v.vertices);
    return volume_rec(to_frame(v.vertices, f), tol) * std::pow(f.scale, static_cast<double>(d));
}

ConeFacets cone_facets(const Matrix& generators, double tol) {
    const Eigen::Index k = generators.cols();
    std::vector<Eigen::Index> live;
    const double top = generators.rows() > 0 ? generators.rowwise().norm().maxCoeff() : 0.0;
    for (Eigen::Index i = 0; i < generators.rows(); ++i)
        if (generators.row(i).norm() > 1e-12 * top) live.push_back(i);
    if (live.empty()) throw InvalidArgument("cone_facets needs a nonzero generator");
    Matrix gen = take_rows(generators, live);
    for (Eigen::Index i = 0; i < gen.rows(); ++i) gen.row(i).normalize();

    ConeFacets out;
    Eigen::JacobiSVD<Matrix> svd(gen, Eigen::ComputeFullV);
    const Vector& sv = svd.singularValues();
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-9 * sv(0)) ++r;
    if (r == k) {
        out.span = Matrix::Identity(k, k);
        out.full_dimensional = true;
    } else {
        out.span = svd.matrixV().leftCols(r);
        out.full_dimensional = false;
    }
    const Matrix sub = gen * out.span;
    Matrix h = extreme_rays(sub, tol) * out.span.transpose();
    for (Eigen::Index i = 0; i < h.rows(); ++i) h.row(i).normalize();
    out.facets = take_rows(h, lex_order(h));
    return out;
}

}  // namespace gptomo::poly

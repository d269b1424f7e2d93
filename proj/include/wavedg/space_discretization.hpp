#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wavedg/linear_solver.hpp"
#include "wavedg/quadrature.hpp"
#include "wavedg/sparse_matrix.hpp"

namespace wavedg {

/// Scalar function of space only.
using SpaceFunction = std::function<double(double x)>;
/// Scalar function of (x, t). An empty SpaceTimeFunction stands for zero.
using SpaceTimeFunction = std::function<double(double x, double t)>;

/// Number of Gauss points per element for loads, projections and error norms.
inline constexpr int kSpatialQuadraturePoints = 5;

/// An exact field together with its spatial derivative.
struct ExactField {
    SpaceTimeFunction value;
    SpaceTimeFunction dx;

    /// Freezes time.
    SpaceFunction value_at(double t) const
    {
        return [v = value, t](double x) { return v(x, t); };
    }
    SpaceFunction dx_at(double t) const
    {
        return [d = dx, t](double x) { return d(x, t); };
    }
};

class Mesh1D {
public:
    /// Mesh from an explicit node list; nodes must be strictly increasing.
    explicit Mesh1D(std::vector<double> nodes) : nodes_(std::move(nodes))
    {
        if (nodes_.size() < 2) {
            throw std::invalid_argument("Mesh1D: need at least two nodes");
        }
        for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
            if (!(nodes_[i + 1] > nodes_[i])) {
                throw std::invalid_argument("Mesh1D: nodes not strictly increasing at index " +
                                            std::to_string(i + 1));
            }
        }
    }

    double a() const { return nodes_.front(); }
    double b() const { return nodes_.back(); }
    std::size_t n_elements() const { return nodes_.size() - 1; }
    std::span<const double> nodes() const { return nodes_; }
    double node(std::size_t i) const { return nodes_[i]; }
    double width(std::size_t e) const { return nodes_[e + 1] - nodes_[e]; }

    double max_width() const
    {
        double h = 0.0;
        for (std::size_t e = 0; e < n_elements(); ++e) h = std::max(h, width(e));
        return h;
    }

    /// Element containing x; points on an interior node go to the element on
    /// their right, b goes to the last element.
    std::size_t locate(double x) const
    {
        if (x < a() || x > b()) {
            throw std::out_of_range("Mesh1D::locate: x outside [a, b]");
        }
        const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
        const auto e = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - nodes_.begin() - 1, 0));
        return std::min(e, n_elements() - 1);
    }

private:
    std::vector<double> nodes_;
};

/// Uniform mesh of nx elements on [a, b].
inline Mesh1D build_uniform_mesh(double a, double b, std::size_t nx)
{
    if (!(b > a)) {
        throw std::invalid_argument("build_uniform_mesh: need b > a");
    }
    if (nx < 2) {
        throw std::invalid_argument("build_uniform_mesh: nx must be at least 2 (nx = " +
                                    std::to_string(nx) + " leaves no interior dof)");
    }
    std::vector<double> nodes(nx + 1);
    const double h = (b - a) / static_cast<double>(nx);
    for (std::size_t i = 0; i <= nx; ++i) nodes[i] = a + h * static_cast<double>(i);
    nodes[nx] = b;
    return Mesh1D(std::move(nodes));
}

/// Continuous piecewise linears on a Mesh1D vanishing at both endpoints.
/// Dof j is the hat function of mesh node j + 1.
///
/// Only degree 1 is built. Higher degree would append element-interior dofs
/// after the vertex dofs, keeping this numbering for the vertices.
class FeSpace {
public:
    explicit FeSpace(Mesh1D mesh) : mesh_(std::move(mesh))
    {
        if (mesh_.n_elements() < 2) {
            throw std::invalid_argument("FeSpace: mesh needs at least two elements");
        }
    }

    const Mesh1D& mesh() const { return mesh_; }
    int degree() const { return 1; }
    std::size_t n_dof() const { return mesh_.n_elements() - 1; }
    std::size_t node_of_dof(std::size_t j) const { return j + 1; }
    double h() const { return mesh_.max_width(); }

    /// Coefficient of the left/right vertex of element e, or npos for a boundary vertex.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t left_dof(std::size_t e) const { return e == 0 ? npos : e - 1; }
    std::size_t right_dof(std::size_t e) const { return e + 1 == mesh_.n_elements() ? npos : e; }

    /// Hat function of dof j at x.
    double basis(std::size_t j, double x) const
    {
        const double xl = mesh_.node(j);
        const double xm = mesh_.node(j + 1);
        const double xr = mesh_.node(j + 2);
        if (x <= xl || x >= xr) return 0.0;
        return x <= xm ? (x - xl) / (xm - xl) : (xr - x) / (xr - xm);
    }

private:
    Mesh1D mesh_;
};

/// A member of an FeSpace: Σ coeffs_j φ_j. The space must outlive it.
class FeFunction {
public:
    FeFunction(const FeSpace& space, Vector coeffs) : space_(&space), coeffs_(std::move(coeffs))
    {
        if (coeffs_.size() != space.n_dof()) {
            throw DimensionError("FeFunction: " + std::to_string(coeffs_.size()) +
                                 " coefficients for a space with " +
                                 std::to_string(space.n_dof()) + " dofs");
        }
    }
    explicit FeFunction(const FeSpace& space) : FeFunction(space, Vector(space.n_dof(), 0.0)) {}

    const FeSpace& space() const { return *space_; }
    const Vector& coeffs() const { return coeffs_; }
    Vector& coeffs() { return coeffs_; }

    /// Value at mesh node i, including the zero boundary nodes.
    double nodal_value(std::size_t i) const
    {
        if (i == 0 || i == space_->mesh().n_elements()) return 0.0;
        return coeffs_[i - 1];
    }

    double operator()(double x) const
    {
        const auto& mesh = space_->mesh();
        const std::size_t e = mesh.locate(x);
        const double s = (x - mesh.node(e)) / mesh.width(e);
        return (1.0 - s) * nodal_value(e) + s * nodal_value(e + 1);
    }

    /// Derivative; on a node the right element's slope is returned.
    double derivative(double x) const
    {
        const auto& mesh = space_->mesh();
        const std::size_t e = mesh.locate(x);
        return (nodal_value(e + 1) - nodal_value(e)) / mesh.width(e);
    }

private:
    const FeSpace* space_;
    Vector coeffs_;
};

/// Nodal interpolant at the interior nodes.
inline FeFunction interpolate(const FeSpace& space, const SpaceFunction& v)
{
    Vector c(space.n_dof());
    for (std::size_t j = 0; j < space.n_dof(); ++j) c[j] = v(space.mesh().node(space.node_of_dof(j)));
    return FeFunction(space, std::move(c));
}

namespace detail {

/// Adds a 2x2 element matrix for element e, dropping boundary rows/columns.
inline void scatter_element(const FeSpace& space, std::size_t e, const double (&local)[2][2],
                            std::vector<Triplet>& out)
{
    const std::size_t dofs[2] = {space.left_dof(e), space.right_dof(e)};
    for (int r = 0; r < 2; ++r) {
        if (dofs[r] == FeSpace::npos) continue;
        for (int c = 0; c < 2; ++c) {
            if (dofs[c] == FeSpace::npos) continue;
            out.push_back({dofs[r], dofs[c], local[r][c]});
        }
    }
}

} // namespace detail

/// M_ij = ∫ φ_i φ_j dx, from the exact P1 element matrix h/6 [[2, 1], [1, 2]].
inline SparseMatrix assemble_mass(const FeSpace& space)
{
    std::vector<Triplet> t;
    for (std::size_t e = 0; e < space.mesh().n_elements(); ++e) {
        const double h = space.mesh().width(e);
        const double local[2][2] = {{h / 3.0, h / 6.0}, {h / 6.0, h / 3.0}};
        detail::scatter_element(space, e, local, t);
    }
    return SparseMatrix::from_triplets(space.n_dof(), space.n_dof(), std::move(t), true);
}

/// A_ij = ∫ φ_i' φ_j' dx, from the exact P1 element matrix 1/h [[1, -1], [-1, 1]].
inline SparseMatrix assemble_stiffness(const FeSpace& space)
{
    std::vector<Triplet> t;
    for (std::size_t e = 0; e < space.mesh().n_elements(); ++e) {
        const double h = space.mesh().width(e);
        const double local[2][2] = {{1.0 / h, -1.0 / h}, {-1.0 / h, 1.0 / h}};
        detail::scatter_element(space, e, local, t);
    }
    return SparseMatrix::from_triplets(space.n_dof(), space.n_dof(), std::move(t), true);
}

/// b_i = ∫ g φ_i dx with 5-point Gauss per element.
inline Vector assemble_load(const FeSpace& space, const SpaceFunction& g)
{
    const auto& q = gauss_legendre(kSpatialQuadraturePoints);
    const auto& mesh = space.mesh();
    Vector b(space.n_dof(), 0.0);
    for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
        const double xl = mesh.node(e);
        const double xr = mesh.node(e + 1);
        double left = 0.0;
        double right = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            const double x = q.point(i, xl, xr);
            const double w = q.weight(i, xl, xr) * g(x);
            const double s = (x - xl) / (xr - xl);
            left += w * (1.0 - s);
            right += w * s;
        }
        if (const auto j = space.left_dof(e); j != FeSpace::npos) b[j] += left;
        if (const auto j = space.right_dof(e); j != FeSpace::npos) b[j] += right;
    }
    return b;
}

/// b_i = ∫ v' φ_i' dx with 5-point Gauss per element: the right side of the
/// Ritz projection.
inline Vector assemble_derivative_load(const FeSpace& space, const SpaceFunction& dv)
{
    const auto& q = gauss_legendre(kSpatialQuadraturePoints);
    const auto& mesh = space.mesh();
    Vector b(space.n_dof(), 0.0);
    for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
        const double xl = mesh.node(e);
        const double xr = mesh.node(e + 1);
        const double mean_slope = q.integrate(dv, xl, xr) / (xr - xl);
        // φ' is -1/h on the left vertex and +1/h on the right one.
        if (const auto j = space.left_dof(e); j != FeSpace::npos) b[j] -= mean_slope;
        if (const auto j = space.right_dof(e); j != FeSpace::npos) b[j] += mean_slope;
    }
    return b;
}

/// R_h v: a(R_h v − v, χ) = 0 for all χ in the space. Only the derivative of
/// v enters; v is assumed to vanish at both endpoints.
inline FeFunction ritz_project(const FeSpace& space, const SpaceFunction& dv)
{
    return FeFunction(space, solve(assemble_stiffness(space), assemble_derivative_load(space, dv), true));
}

inline FeFunction ritz_project(const FeSpace& space, const ExactField& v, double t)
{
    return ritz_project(space, v.dx_at(t));
}

/// P_h v: (P_h v − v, χ) = 0 for all χ in the space.
inline FeFunction l2_project(const FeSpace& space, const SpaceFunction& v)
{
    return FeFunction(space, solve(assemble_mass(space), assemble_load(space, v), true));
}

struct ErrorNorms {
    double l2 = 0.0;
    double h1 = 0.0; ///< seminorm ‖u_h' − u'‖, the a-norm
};

/// ‖u_h − u(t)‖ and ‖u_h' − u'(t)‖ with 5-point Gauss per element.
inline ErrorNorms error_norms(const FeSpace& space, std::span<const double> coeffs,
                              const ExactField& exact, double t)
{
    if (coeffs.size() != space.n_dof()) {
        throw DimensionError("error_norms: coefficient count does not match the space");
    }
    const auto& q = gauss_legendre(kSpatialQuadraturePoints);
    const auto& mesh = space.mesh();
    auto nodal = [&](std::size_t i) {
        return (i == 0 || i == mesh.n_elements()) ? 0.0 : coeffs[i - 1];
    };
    double l2 = 0.0;
    double h1 = 0.0;
    for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
        const double xl = mesh.node(e);
        const double xr = mesh.node(e + 1);
        const double ul = nodal(e);
        const double ur = nodal(e + 1);
        const double slope = (ur - ul) / (xr - xl);
        for (std::size_t i = 0; i < q.size(); ++i) {
            const double x = q.point(i, xl, xr);
            const double w = q.weight(i, xl, xr);
            const double s = (x - xl) / (xr - xl);
            const double ev = (1.0 - s) * ul + s * ur - exact.value(x, t);
            l2 += w * ev * ev;
            if (exact.dx) {
                const double ed = slope - exact.dx(x, t);
                h1 += w * ed * ed;
            }
        }
    }
    return {std::sqrt(l2), std::sqrt(h1)};
}

inline ErrorNorms error_norms(const FeFunction& u_h, const ExactField& exact, double t)
{
    return error_norms(u_h.space(), u_h.coeffs(), exact, t);
}

} // namespace wavedg

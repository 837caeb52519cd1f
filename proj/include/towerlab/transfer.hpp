#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/SparseCore>

#include "towerlab/errors.hpp"
#include "towerlab/measures.hpp"
#include "towerlab/numerics.hpp"
#include "towerlab/observables.hpp"
#include "towerlab/return_time_spec.hpp"
#include "towerlab/tower.hpp"

namespace towerlab {

inline constexpr std::uint64_t kDefaultCellCap = 200000;

/// Number of depth-d cells: (Σ R_i)·B^{d-1}. Saturates at UINT64_MAX.
inline std::uint64_t cylinder_cell_count(const ReturnTimeSpec& spec, std::uint32_t depth)
{
    std::uint64_t roofs = 0;
    for (const auto& b : spec.branches())
        roofs += b.return_time;
    std::uint64_t n = roofs;
    for (std::uint32_t k = 1; k < depth; ++k) {
        if (n > UINT64_MAX / spec.size())
            return UINT64_MAX;
        n *= spec.size();
    }
    return n;
}

/// Cells (ℓ, w) of the depth-d cylinder partition of the quotient tower, with
/// ν̄-masses c·Π p_{w[j]}. Cells are ordered by first symbol, then level, then
/// the remaining word read as a base-B number.
class CylinderBasis {
  public:
    CylinderBasis(const ReturnTimeSpec& spec, std::uint32_t depth,
                  std::uint64_t cell_cap = kDefaultCellCap, double kac_override = 0.0)
        : spec_(spec), depth_(depth)
    {
        if (depth < 1)
            throw ParameterError("cylinder depth must be >= 1");
        const auto count = cylinder_cell_count(spec, depth);
        if (count > cell_cap) {
            int suggest = static_cast<int>(depth);
            while (suggest > 1 && cylinder_cell_count(spec, static_cast<std::uint32_t>(suggest)) > cell_cap)
                --suggest;
            if (cylinder_cell_count(spec, static_cast<std::uint32_t>(suggest)) > cell_cap)
                suggest = 0;
            throw SizeError("depth " + std::to_string(depth) + " needs " + std::to_string(count) +
                                " cells, cap is " + std::to_string(cell_cap),
                            suggest);
        }
        kac_ = level_masses(spec, kac_override).kac_norm;
        tails_ = 1;
        for (std::uint32_t k = 1; k < depth; ++k)
            tails_ *= spec.size();
        offsets_.resize(spec.size() + 1, 0);
        for (std::size_t i = 0; i < spec.size(); ++i)
            offsets_[i + 1] = offsets_[i] + spec.branches()[i].return_time * tails_;

        // Mass of each tail word (product of its probabilities).
        tail_mass_.assign(tails_, 1.0);
        for (std::uint64_t t = 0; t < tails_; ++t) {
            std::uint64_t r = t;
            double m = 1.0;
            for (std::uint32_t k = 1; k < depth; ++k) {
                m *= spec.branches()[r % spec.size()].p;
                r /= spec.size();
            }
            tail_mass_[t] = m;
        }
        masses_.resize(offsets_.back());
        for (std::size_t i = 0; i < spec.size(); ++i) {
            const double head = kac_ * spec.branches()[i].p;
            for (std::uint64_t c = offsets_[i]; c < offsets_[i + 1]; ++c)
                masses_[c] = head * tail_mass_[(c - offsets_[i]) % tails_];
        }
    }

    const ReturnTimeSpec& spec() const noexcept { return spec_; }
    std::uint32_t depth() const noexcept { return depth_; }
    std::size_t size() const noexcept { return masses_.size(); }
    double kac_norm() const noexcept { return kac_; }
    const std::vector<double>& masses() const noexcept { return masses_; }
    std::uint64_t tail_count() const noexcept { return tails_; }

    /// Cell index from (first-symbol position, level, tail index).
    std::size_t index(std::size_t head, std::uint32_t level, std::uint64_t tail) const noexcept
    {
        return offsets_[head] + level * tails_ + tail;
    }

    /// Level of a cell and its word (branch positions, not labels).
    struct Cell {
        std::uint32_t level;
        std::vector<std::size_t> positions;
    };

    Cell cell(std::size_t idx) const
    {
        std::size_t head = 0;
        while (offsets_[head + 1] <= idx)
            ++head;
        const auto rel = idx - offsets_[head];
        Cell c{static_cast<std::uint32_t>(rel / tails_), {head}};
        auto t = rel % tails_;
        for (std::uint32_t k = 1; k < depth_; ++k) {
            c.positions.push_back(t % spec_.size());
            t /= spec_.size();
        }
        return c;
    }

    /// Tail index of positions w[1..d) (little-endian base B).
    std::uint64_t tail_index(const std::vector<std::size_t>& w, std::size_t from = 1) const
    {
        std::uint64_t t = 0, scale = 1;
        for (std::uint32_t k = 1; k < depth_; ++k) {
            t += w[from + k - 1] * scale;
            scale *= spec_.size();
        }
        return t;
    }

    std::size_t cell_of(const TowerPoint& p) const
    {
        std::vector<std::size_t> w(depth_);
        for (std::uint32_t k = 0; k < depth_; ++k)
            w[k] = spec_.position(p.future(k));
        check_point(spec_, p);
        return index(w[0], p.level(), tail_index(w));
    }

    /// A representative point of the cell (future continues with branch 1's label).
    TowerPoint cell_point(std::size_t idx) const
    {
        const auto c = cell(idx);
        std::vector<Symbol> word;
        for (auto pos : c.positions)
            word.push_back(spec_.branches()[pos].index);
        return TowerPoint::from_symbols(std::move(word), spec_.branches()[0].index, {}, c.level);
    }

    /// Coefficients of f on the cells, f evaluated at the representatives.
    Eigen::VectorXd sample(const TowerObservable& f) const
    {
        Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
        for (std::size_t i = 0; i < size(); ++i)
            v[static_cast<Eigen::Index>(i)] = f(cell_point(i));
        return v;
    }

    double integrate(const Eigen::VectorXd& v) const
    {
        CompensatedSum s;
        for (std::size_t i = 0; i < size(); ++i)
            s.add(masses_[i] * v[static_cast<Eigen::Index>(i)]);
        return s.value();
    }

  private:
    ReturnTimeSpec spec_;
    std::uint32_t depth_;
    double kac_ = 1.0;
    std::uint64_t tails_ = 1;
    std::vector<std::uint64_t> offsets_;
    std::vector<double> tail_mass_;
    std::vector<double> masses_;
};

/// Transfer operator of the quotient tower restricted to depth-d cylinder
/// functions, which form an invariant subspace in the affine model:
/// (Lφ)(ℓ, w) = φ(ℓ-1, w) for ℓ ≥ 1 and (Lφ)(0, w) = Σ_i p_i φ(R_i - 1, i·w[0..d-2]).
class CylinderOperator {
  public:
    using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

    explicit CylinderOperator(std::shared_ptr<const CylinderBasis> basis)
        : basis_(std::move(basis))
    {
        const auto& b = *basis_;
        const auto& spec = b.spec();
        const auto B = spec.size();
        const auto tails = b.tail_count();
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(b.size() + tails * B * B);
        std::vector<std::size_t> w(b.depth());
        for (std::size_t head = 0; head < B; ++head) {
            const auto R = spec.branches()[head].return_time;
            for (std::uint64_t t = 0; t < tails; ++t) {
                // Level 0 target: inflow from the roofs of all branches i.
                // Source word i·w[0..d-2]: head i, tail (w[0], ..., w[d-2]).
                const std::uint64_t shifted = (t * B + head) % tails;
                for (std::size_t i = 0; i < B; ++i) {
                    const auto Ri = spec.branches()[i].return_time;
                    trips.emplace_back(static_cast<int>(b.index(head, 0, t)),
                                       static_cast<int>(b.index(i, Ri - 1, shifted)),
                                       spec.branches()[i].p);
                }
                for (std::uint32_t l = 1; l < R; ++l)
                    trips.emplace_back(static_cast<int>(b.index(head, l, t)),
                                       static_cast<int>(b.index(head, l - 1, t)), 1.0);
            }
        }
        const auto n = static_cast<Eigen::Index>(b.size());
        matrix_.resize(n, n);
        matrix_.setFromTriplets(trips.begin(), trips.end());
        matrix_.makeCompressed();
    }

    const CylinderBasis& basis() const noexcept { return *basis_; }
    std::shared_ptr<const CylinderBasis> shared_basis() const noexcept { return basis_; }
    const Matrix& matrix() const noexcept { return matrix_; }

    Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return matrix_ * v; }

    Eigen::VectorXd power(Eigen::VectorXd v, std::uint64_t n) const
    {
        for (std::uint64_t k = 0; k < n; ++k)
            v = matrix_ * v;
        return v;
    }

  private:
    std::shared_ptr<const CylinderBasis> basis_;
    Matrix matrix_;
};

/// Build the operator on depth-d cells, throwing SizeError above the cap.
inline CylinderOperator build_operator(const ReturnTimeSpec& spec, std::uint32_t depth,
                                       std::uint64_t cell_cap = kDefaultCellCap)
{
    return CylinderOperator(std::make_shared<const CylinderBasis>(spec, depth, cell_cap));
}

/// φ - ∫φ dν̄.
inline Eigen::VectorXd centered(const CylinderBasis& basis, const Eigen::VectorXd& phi)
{
    return phi.array() - basis.integrate(phi);
}

inline double l1_norm(const CylinderBasis& basis, const Eigen::VectorXd& v)
{
    CompensatedSum s;
    for (std::size_t i = 0; i < basis.size(); ++i)
        s.add(basis.masses()[i] * std::abs(v[static_cast<Eigen::Index>(i)]));
    return s.value();
}

/// D(n) = ∫|L^n(φ - ∫φ)| dν̄ for n = 0..n_max.
inline std::vector<double> l1_decay(const CylinderOperator& op, const Eigen::VectorXd& phi,
                                    std::uint64_t n_max)
{
    std::vector<double> out;
    out.reserve(n_max + 1);
    Eigen::VectorXd v = centered(op.basis(), phi);
    for (std::uint64_t n = 0; n <= n_max; ++n) {
        out.push_back(l1_norm(op.basis(), v));
        if (n < n_max)
            v = op.apply(v);
    }
    return out;
}

/// Corr(n) = |∫ L^n(φ - ∫φ)·ψ dν̄| for n = 0..n_max.
inline std::vector<double> corr_exact(const CylinderOperator& op, const Eigen::VectorXd& phi,
                                      const Eigen::VectorXd& psi, std::uint64_t n_max)
{
    std::vector<double> out;
    out.reserve(n_max + 1);
    Eigen::VectorXd v = centered(op.basis(), phi);
    for (std::uint64_t n = 0; n <= n_max; ++n) {
        out.push_back(std::abs(op.basis().integrate(v.cwiseProduct(psi))));
        if (n < n_max)
            v = op.apply(v);
    }
    return out;
}

/// ∫|L^n(φ - ∫φ)|^q dν̄.
inline double centered_lq_moment(const CylinderOperator& op, const Eigen::VectorXd& phi,
                                 std::uint64_t n, double q)
{
    const Eigen::VectorXd v = op.power(centered(op.basis(), phi), n);
    CompensatedSum s;
    for (std::size_t i = 0; i < op.basis().size(); ++i)
        s.add(op.basis().masses()[i] * std::pow(std::abs(v[static_cast<Eigen::Index>(i)]), q));
    return s.value();
}

} // namespace towerlab

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "towerlab/return_time_spec.hpp"
#include "towerlab/rng.hpp"

namespace towerlab {

/// Bi-infinite symbol sequence. Index k >= 0 is on the future side, k < 0 on
/// the past side (k = -1 is the most recent past symbol). Explicit heads are
/// stored; everything beyond them is either a constant fill or an i.i.d. stream
/// drawn from the counter hash of the stored seed.
class SymbolSource {
  public:
    /// Finite heads padded with a constant fill symbol.
    SymbolSource(std::vector<Symbol> future_head, std::vector<Symbol> past_head, Symbol fill)
        : future_head_(std::move(future_head)), past_head_(std::move(past_head)), fill_(fill)
    {
    }

    /// Heads continued by an i.i.d. stream with the sampler's weights.
    SymbolSource(std::vector<Symbol> future_head, std::vector<Symbol> past_head,
                 std::shared_ptr<const DiscreteSampler> sampler, std::uint64_t seed)
        : future_head_(std::move(future_head)), past_head_(std::move(past_head)),
          sampler_(std::move(sampler)), seed_(seed)
    {
    }

    Symbol at(std::int64_t k) const noexcept
    {
        if (k >= 0) {
            if (static_cast<std::uint64_t>(k) < future_head_.size())
                return future_head_[static_cast<std::size_t>(k)];
        } else {
            const auto j = static_cast<std::uint64_t>(-(k + 1));
            if (j < past_head_.size())
                return past_head_[static_cast<std::size_t>(j)];
        }
        if (!sampler_)
            return fill_;
        return sampler_->draw(rng::uniform(seed_, static_cast<std::uint64_t>(k)));
    }

  private:
    std::vector<Symbol> future_head_;
    std::vector<Symbol> past_head_;
    std::shared_ptr<const DiscreteSampler> sampler_;
    std::uint64_t seed_ = 0;
    Symbol fill_ = 1;
};

/// Point (x, ℓ) of the tower: future and past itineraries of the base point x
/// under the return map, plus the level. Immutable value; copies share the
/// underlying symbol source.
class TowerPoint {
  public:
    static constexpr std::uint64_t kUnboundedPast = std::numeric_limits<std::uint64_t>::max();

    TowerPoint(std::shared_ptr<const SymbolSource> source, std::int64_t origin,
               std::uint64_t past_length, std::uint32_t level)
        : source_(std::move(source)), origin_(origin), past_length_(past_length), level_(level)
    {
    }

    /// Future given explicitly, then `fill` repeated; finite past.
    static TowerPoint from_symbols(std::vector<Symbol> future, Symbol fill,
                                   std::vector<Symbol> past = {}, std::uint32_t level = 0)
    {
        const auto n = past.size();
        return TowerPoint(std::make_shared<const SymbolSource>(std::move(future), std::move(past),
                                                               fill),
                          0, n, level);
    }

    /// Future head then an i.i.d. p-stream; past head then (if unbounded) the same stream.
    static TowerPoint with_random_tail(const ReturnTimeSpec& spec, std::uint64_t seed,
                                       std::vector<Symbol> future_head,
                                       std::vector<Symbol> past_head, std::uint64_t past_length,
                                       std::uint32_t level)
    {
        return TowerPoint(std::make_shared<const SymbolSource>(std::move(future_head),
                                                               std::move(past_head),
                                                               spec.shared_symbol_sampler(), seed),
                          0, past_length, level);
    }

    Symbol future(std::uint64_t k) const noexcept
    {
        return source_->at(origin_ + static_cast<std::int64_t>(k));
    }

    /// k-th most recent past symbol; requires k < past_length().
    Symbol past(std::uint64_t k) const noexcept
    {
        return source_->at(origin_ - 1 - static_cast<std::int64_t>(k));
    }

    std::uint64_t past_length() const noexcept { return past_length_; }
    bool has_unbounded_past() const noexcept { return past_length_ == kUnboundedPast; }
    std::uint32_t level() const noexcept { return level_; }

    /// Same symbols and level, past cleared.
    TowerPoint without_past() const { return TowerPoint(source_, origin_, 0, level_); }

    TowerPoint with_level(std::uint32_t level) const
    {
        return TowerPoint(source_, origin_, past_length_, level);
    }

    /// Return-map action on the itineraries: first future symbol moves onto the past.
    TowerPoint shifted() const
    {
        const auto past = has_unbounded_past() ? kUnboundedPast : past_length_ + 1;
        return TowerPoint(source_, origin_ + 1, past, 0);
    }

    /// In-place tower step, for orbit loops that must not allocate.
    void advance(const ReturnTimeSpec& spec)
    {
        const auto r = spec.return_time(future(0));
        if (level_ >= r)
            throw InvalidPoint("level " + std::to_string(level_) + " not below roof " +
                               std::to_string(r));
        if (level_ + 1 < r) {
            ++level_;
        } else {
            ++origin_;
            level_ = 0;
            if (!has_unbounded_past())
                ++past_length_;
        }
    }

  private:
    std::shared_ptr<const SymbolSource> source_;
    std::int64_t origin_;
    std::uint64_t past_length_;
    std::uint32_t level_;
};

inline void check_point(const ReturnTimeSpec& spec, const TowerPoint& p)
{
    const auto r = spec.return_time(p.future(0));
    if (p.level() >= r)
        throw InvalidPoint("level " + std::to_string(p.level()) + " not below roof " +
                           std::to_string(r));
}

/// T(x,ℓ) = (x,ℓ+1) below the roof, (f^R x, 0) at the roof.
inline TowerPoint tower_step(const ReturnTimeSpec& spec, const TowerPoint& p)
{
    TowerPoint q = p;
    q.advance(spec);
    return q;
}

/// Projection onto the reference unstable leaf (empty past).
inline TowerPoint quotient_project(const TowerPoint& p) { return p.without_past(); }

/// Step of the quotient tower: T̄ = Θ∘T on quotient points.
inline TowerPoint quotient_step(const ReturnTimeSpec& spec, const TowerPoint& p)
{
    return quotient_project(tower_step(spec, p));
}

/// Extended nonnegative integer; `infinite()` when no difference was found
/// within the comparison horizon.
class SeparationTime {
  public:
    static constexpr SeparationTime infinite() noexcept { return SeparationTime(kInf); }
    constexpr explicit SeparationTime(std::uint64_t n) noexcept : n_(n) {}

    constexpr bool is_infinite() const noexcept { return n_ == kInf; }
    constexpr std::uint64_t value() const noexcept { return n_; }

    friend constexpr bool operator==(SeparationTime, SeparationTime) = default;

  private:
    static constexpr std::uint64_t kInf = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t n_;
};

/// s(x,y): 0 for different levels, otherwise the first return at which the
/// itineraries land in different branches.
inline SeparationTime separation_time(const TowerPoint& x, const TowerPoint& y,
                                      std::uint64_t horizon)
{
    if (x.level() != y.level())
        return SeparationTime(0);
    for (std::uint64_t k = 0; k < horizon; ++k)
        if (x.future(k) != y.future(k))
            return SeparationTime(k);
    return SeparationTime::infinite();
}

/// β^{s(x,y)}, zero at infinite separation.
inline double dyn_distance(const TowerPoint& x, const TowerPoint& y, double beta,
                           std::uint64_t horizon)
{
    const auto s = separation_time(x, y, horizon);
    if (s.is_infinite())
        return 0.0;
    return std::pow(beta, static_cast<double>(s.value()));
}

/// Symbol-exact comparison over `horizon` future and past symbols.
inline bool same_point(const TowerPoint& a, const TowerPoint& b, std::uint64_t horizon)
{
    if (a.level() != b.level())
        return false;
    const auto pa = std::min(a.past_length(), horizon);
    const auto pb = std::min(b.past_length(), horizon);
    if (pa != pb)
        return false;
    for (std::uint64_t k = 0; k < horizon; ++k)
        if (a.future(k) != b.future(k))
            return false;
    for (std::uint64_t k = 0; k < pa; ++k)
        if (a.past(k) != b.past(k))
            return false;
    return true;
}

struct GeometricCoords {
    double u = 0.0; ///< unstable coordinate in [0,1)
    double s = 0.0; ///< stable coordinate in [0,1)
};

/// Numeric view of a point. u is the nested-interval left end of the depth-d
/// future cylinder under the affine full-branch return map; s sums
/// (1-β_s)·L(past[k])·β_s^k over at most `depth` past symbols.
inline GeometricCoords geometric_embed(const ReturnTimeSpec& spec, const TowerPoint& p,
                                       std::uint64_t depth)
{
    if (depth < 1)
        throw ParameterError("geometric_embed needs depth >= 1");
    GeometricCoords c;
    double width = 1.0;
    for (std::uint64_t k = 0; k < depth; ++k) {
        const Symbol a = p.future(k);
        c.u += width * spec.left_endpoint(a);
        width *= spec.probability(a);
        if (width == 0.0)
            break;
    }
    const double bs = spec.beta_s();
    const auto past = std::min(p.past_length(), depth);
    double scale = 1.0 - bs;
    for (std::uint64_t k = 0; k < past && scale > 0.0; ++k) {
        c.s += scale * spec.left_endpoint(p.past(k));
        scale *= bs;
    }
    return c;
}

/// Width of the depth-d future cylinder containing p (product of branch widths).
inline double cylinder_width(const ReturnTimeSpec& spec, const TowerPoint& p, std::uint64_t depth)
{
    double w = 1.0;
    for (std::uint64_t k = 0; k < depth; ++k)
        w *= spec.probability(p.future(k));
    return w;
}

} // namespace towerlab

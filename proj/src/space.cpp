#include "relia/space.hpp"

#include "relia/error.hpp"

#include <algorithm>
#include <set>

namespace relia {

SearchSpace::SearchSpace(std::vector<Dimension> dims) : dims_(std::move(dims))
{
    if (dims_.empty())
        throw ValidationError("search space must have at least one dimension");
    std::set<std::string> names;
    for (const auto& d : dims_) {
        if (!names.insert(d.name).second)
            throw ValidationError("duplicate dimension name '" + d.name + "'");
        if (!(d.lower < d.upper))
            throw ValidationError("dimension '" + d.name + "' needs lower < upper");
    }
}

std::size_t SearchSpace::index_of(const std::string& name) const
{
    for (std::size_t i = 0; i < dims_.size(); ++i)
        if (dims_[i].name == name)
            return i;
    throw ValidationError("unknown dimension '" + name + "'");
}

bool SearchSpace::contains(const DistortionLevel& level) const
{
    if (level.dim() != dim())
        return false;
    for (std::size_t i = 0; i < dim(); ++i)
        if (!(level.coords[i] >= dims_[i].lower && level.coords[i] <= dims_[i].upper))
            return false;
    return true;
}

void SearchSpace::check(const DistortionLevel& level) const
{
    if (level.dim() != dim())
        throw ValidationError("level has " + std::to_string(level.dim()) +
                              " coordinates, search space has " + std::to_string(dim()));
    for (std::size_t i = 0; i < dim(); ++i) {
        const double v = level.coords[i];
        if (!(v >= dims_[i].lower && v <= dims_[i].upper))
            throw ValidationError("coordinate " + std::to_string(v) + " outside [" +
                                  std::to_string(dims_[i].lower) + ", " +
                                  std::to_string(dims_[i].upper) + "] for dimension '" +
                                  dims_[i].name + "'");
    }
}

std::vector<double> SearchSpace::normalize(const DistortionLevel& level) const
{
    if (level.dim() != dim())
        throw ValidationError("level has " + std::to_string(level.dim()) +
                              " coordinates, search space has " + std::to_string(dim()));
    std::vector<double> out(dim());
    for (std::size_t i = 0; i < dim(); ++i)
        out[i] = (level.coords[i] - dims_[i].lower) / (dims_[i].upper - dims_[i].lower);
    return out;
}

DistortionLevel SearchSpace::denormalize(const std::vector<double>& unit) const
{
    if (unit.size() != dim())
        throw ValidationError("unit vector has " + std::to_string(unit.size()) +
                              " coordinates, search space has " + std::to_string(dim()));
    DistortionLevel out;
    out.coords.resize(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
        const double v = dims_[i].lower + unit[i] * (dims_[i].upper - dims_[i].lower);
        out.coords[i] = std::clamp(v, dims_[i].lower, dims_[i].upper);
    }
    return out;
}

DistortionLevel SearchSpace::clamp(DistortionLevel level) const
{
    for (std::size_t i = 0; i < std::min(dim(), level.dim()); ++i)
        level.coords[i] = std::clamp(level.coords[i], dims_[i].lower, dims_[i].upper);
    return level;
}

bool SearchSpace::operator==(const SearchSpace& other) const
{
    if (dim() != other.dim())
        return false;
    for (std::size_t i = 0; i < dim(); ++i) {
        const auto& a = dims_[i];
        const auto& b = other.dims_[i];
        if (a.name != b.name || a.lower != b.lower || a.upper != b.upper)
            return false;
    }
    return true;
}

SearchSpace distortion_space()
{
    return SearchSpace({
        {"scale", 0.7, 1.3},
        {"rotation", 0.0, 90.0},
        {"translate_x", -0.2, 0.2},
        {"translate_y", -0.2, 0.2},
        {"darkness", 0.7, 1.3},
        {"rain", 0.0, 1.0},
    });
}

DistortionLevel identity_level()
{
    return DistortionLevel{{1.0, 0.0, 0.0, 0.0, 1.0, 0.0}};
}

} // namespace relia

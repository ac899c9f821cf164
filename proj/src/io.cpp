#include "relia/io.hpp"

#include "relia/error.hpp"

#include <charconv>
#include <sstream>
#include <vector>

namespace relia {

std::string exact_number(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

namespace {

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream s(line);
    while (std::getline(s, field, ','))
        out.push_back(field);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

std::string strip_cr(std::string line)
{
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    return line;
}

template <class T>
T parse_field(const std::string& text, std::size_t row, const std::string& column)
{
    T value{};
    const auto* end = text.data() + text.size();
    const auto r = std::from_chars(text.data(), end, value);
    if (text.empty() || r.ec != std::errc() || r.ptr != end)
        throw ValidationError("row " + std::to_string(row) + ", column '" + column +
                              "': cannot parse '" + text + "'");
    return value;
}

void check_header(const std::string& line, const SearchSpace& space,
                  const std::vector<std::string>& tail)
{
    std::vector<std::string> expected;
    for (const auto& d : space.dims())
        expected.push_back(d.name);
    expected.insert(expected.end(), tail.begin(), tail.end());
    if (split(line) != expected) {
        std::string want;
        for (const auto& e : expected)
            want += (want.empty() ? "" : ",") + e;
        throw ValidationError("unexpected CSV header '" + line + "', want '" + want + "'");
    }
}

void write_header(const SearchSpace& space, const std::vector<std::string>& tail, std::ostream& out)
{
    bool first = true;
    for (const auto& d : space.dims()) {
        out << (first ? "" : ",") << d.name;
        first = false;
    }
    for (const auto& t : tail)
        out << ',' << t;
    out << '\n';
}

const std::vector<std::string> kLabeledTail{"accuracy", "label"};
const std::vector<std::string> kRebalancedTail{"label", "weight", "synthetic", "parent", "neighbor"};

} // namespace

void write_labeled_csv(const LabeledSet& set, const SearchSpace& space, std::ostream& out)
{
    write_header(space, kLabeledTail, out);
    for (const auto& s : set.samples) {
        for (double c : s.level.coords)
            out << exact_number(c) << ',';
        out << exact_number(s.accuracy) << ',' << s.label << '\n';
    }
}

LabeledSet read_labeled_csv(std::istream& in, const SearchSpace& space, double h)
{
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError("empty training-set file");
    check_header(strip_cr(line), space, kLabeledTail);
    const std::size_t d = space.dim();
    LabeledSet set;
    set.threshold = h;
    for (std::size_t row = 1; std::getline(in, line); ++row) {
        line = strip_cr(line);
        if (line.empty())
            continue;
        const auto f = split(line);
        if (f.size() != d + 2)
            throw ValidationError("row " + std::to_string(row) + " has " +
                                  std::to_string(f.size()) + " fields, want " +
                                  std::to_string(d + 2));
        Sample s;
        s.level.coords.resize(d);
        for (std::size_t j = 0; j < d; ++j)
            s.level.coords[j] = parse_field<double>(f[j], row, space[j].name);
        space.check(s.level);
        s.accuracy = parse_field<double>(f[d], row, "accuracy");
        s.label = parse_field<int>(f[d + 1], row, "label");
        set.samples.push_back(std::move(s));
    }
    set.check();
    return set;
}

void write_rebalanced_csv(const RebalancedSet& set, const SearchSpace& space, std::ostream& out)
{
    write_header(space, kRebalancedTail, out);
    for (const auto& s : set.samples) {
        for (double c : s.coords)
            out << exact_number(c) << ',';
        out << s.label << ',' << exact_number(s.weight) << ',' << (s.synthetic ? 1 : 0) << ','
            << s.parent << ',';
        if (s.neighbor)
            out << *s.neighbor;
        out << '\n';
    }
}

RebalancedSet read_rebalanced_csv(std::istream& in, const SearchSpace& space)
{
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError("empty rebalanced-set file");
    check_header(strip_cr(line), space, kRebalancedTail);
    const std::size_t d = space.dim();
    RebalancedSet set;
    for (std::size_t row = 1; std::getline(in, line); ++row) {
        line = strip_cr(line);
        if (line.empty())
            continue;
        const auto f = split(line);
        if (f.size() != d + 5)
            throw ValidationError("row " + std::to_string(row) + " has " +
                                  std::to_string(f.size()) + " fields, want " +
                                  std::to_string(d + 5));
        WeightedSample s;
        s.coords.resize(d);
        for (std::size_t j = 0; j < d; ++j)
            s.coords[j] = parse_field<double>(f[j], row, space[j].name);
        space.check(DistortionLevel{s.coords});
        s.label = parse_field<int>(f[d], row, "label");
        if (s.label != 0 && s.label != 1)
            throw ValidationError("row " + std::to_string(row) + ": label must be 0 or 1");
        s.weight = parse_field<double>(f[d + 1], row, "weight");
        if (!(s.weight > 0.0))
            throw ValidationError("row " + std::to_string(row) + ": weight must be positive");
        s.synthetic = parse_field<int>(f[d + 2], row, "synthetic") != 0;
        s.parent = parse_field<std::size_t>(f[d + 3], row, "parent");
        if (!f[d + 4].empty())
            s.neighbor = parse_field<std::size_t>(f[d + 4], row, "neighbor");
        set.samples.push_back(std::move(s));
    }
    set.method = "file";
    return set;
}

} // namespace relia

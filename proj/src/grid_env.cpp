#include "alignteach/grid_env.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "alignteach/error.hpp"

namespace alignteach {

std::string_view to_string(Labeling labeling) {
    switch (labeling) {
        case Labeling::columns: return "columns";
        case Labeling::rows: return "rows";
        case Labeling::quadrants: return "quadrants";
    }
    return "unknown";
}

Labeling parse_labeling(std::string_view text) {
    if (text == "columns" || text == "cols") return Labeling::columns;
    if (text == "rows") return Labeling::rows;
    if (text == "quadrants" || text == "quad") return Labeling::quadrants;
    throw Error(ErrorKind::specification, "unknown labeling '" + std::string(text) + "'");
}

GridSpec::GridSpec(int side, Labeling labeling) : side_(side), labeling_(labeling) {
    if (side < 2) throw Error(ErrorKind::specification, "grid side must be >= 2, got " + std::to_string(side));
}

int GridSpec::categories() const noexcept {
    return labeling_ == Labeling::quadrants ? 4 : side_;
}

Representation Representation::canonical(int side) {
    if (side < 2) throw Error(ErrorKind::specification, "grid side must be >= 2");
    std::vector<Coord> placement;
    placement.reserve(static_cast<std::size_t>(side * side));
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) placement.push_back({x, y});
    return Representation(side, std::move(placement));
}

bool is_bijection(int side, const std::vector<Coord>& placement) {
    if (side < 1 || placement.size() != static_cast<std::size_t>(side * side)) return false;
    std::vector<char> used(placement.size(), 0);
    for (const Coord& c : placement) {
        if (c.x < 0 || c.y < 0 || c.x >= side || c.y >= side) return false;
        char& slot = used[static_cast<std::size_t>(c.y * side + c.x)];
        if (slot) return false;
        slot = 1;
    }
    return true;
}

Representation::Representation(int side, std::vector<Coord> placement)
    : side_(side), placement_(std::move(placement)) {
    if (!is_bijection(side_, placement_))
        throw Error(ErrorKind::specification, "placement is not a bijection onto the lattice");
}

TrueLabels::TrueLabels(std::vector<Category> labels, int categories)
    : labels_(std::move(labels)), categories_(categories) {
    std::vector<char> seen(static_cast<std::size_t>(std::max(categories, 0)), 0);
    for (Category c : labels_) {
        if (c < 0 || c >= categories_) throw Error(ErrorKind::specification, "label out of range");
        seen[static_cast<std::size_t>(c)] = 1;
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw Error(ErrorKind::specification, "every category needs at least one stimulus");
}

TrueLabels true_labels(const GridSpec& spec) {
    const int n = spec.side();
    const int split = (n + 1) / 2;
    std::vector<Category> labels(static_cast<std::size_t>(spec.stimuli()));
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            Category c = 0;
            switch (spec.labeling()) {
                case Labeling::columns: c = x; break;
                case Labeling::rows: c = y; break;
                case Labeling::quadrants: c = 2 * (y >= split ? 1 : 0) + (x >= split ? 1 : 0); break;
            }
            labels[static_cast<std::size_t>(y * n + x)] = c;
        }
    }
    return TrueLabels(std::move(labels), spec.categories());
}

CorruptionTrace corrupt_with_trace(const Representation& base, double level, Rng& rng) {
    if (!(level >= 0.0 && level <= 1.0))
        throw Error(ErrorKind::range, "corruption level must lie in [0, 1]");
    std::vector<StimulusId> marked;
    // Always consume one draw per stimulus so the stream position does not
    // depend on the level.
    for (StimulusId id = 0; id < base.size(); ++id) {
        if (uniform01(rng) < level) marked.push_back(id);
    }
    std::shuffle(marked.begin(), marked.end(), rng);
    std::vector<Coord> placement = base.placement();
    const int pairs = static_cast<int>(marked.size()) / 2;
    for (int p = 0; p < pairs; ++p) {
        auto a = static_cast<std::size_t>(marked[static_cast<std::size_t>(2 * p)]);
        auto b = static_cast<std::size_t>(marked[static_cast<std::size_t>(2 * p + 1)]);
        std::swap(placement[a], placement[b]);
    }
    return {Representation(base.side(), std::move(placement)), static_cast<int>(marked.size()), pairs};
}

Representation corrupt_representation(const Representation& base, double level, Rng& rng) {
    return corrupt_with_trace(base, level, rng).result;
}

double alignment(const Representation& a, const Representation& b) {
    if (a.side() != b.side()) throw Error(ErrorKind::dimension, "alignment: grid sizes differ");
    const int count = a.size();
    // Single pass: accumulate the moments of both distance vectors.
    double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
    std::size_t pairs = 0;
    for (int i = 0; i < count; ++i) {
        const Coord ai = a.at(i);
        const Coord bi = b.at(i);
        for (int j = i + 1; j < count; ++j) {
            const double da = std::sqrt(static_cast<double>(squared_distance(ai, a.at(j))));
            const double db = std::sqrt(static_cast<double>(squared_distance(bi, b.at(j))));
            sa += da;
            sb += db;
            saa += da * da;
            sbb += db * db;
            sab += da * db;
            ++pairs;
        }
    }
    const double n = static_cast<double>(pairs);
    const double cov = sab - sa * sb / n;
    const double va = saa - sa * sa / n;
    const double vb = sbb - sb * sb / n;
    if (va <= 0.0 || vb <= 0.0) throw Error(ErrorKind::degenerate_input, "alignment: zero-variance distances");
    return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

void to_json(nlohmann::json& j, const GridSpec& spec) {
    j = nlohmann::json{{"n", spec.side()}, {"labeling", std::string(to_string(spec.labeling()))},
                       {"k", spec.categories()}};
}

GridSpec grid_spec_from_json(const nlohmann::json& j) {
    return GridSpec(j.at("n").get<int>(), parse_labeling(j.at("labeling").get<std::string>()));
}

void to_json(nlohmann::json& j, const Representation& rep) {
    nlohmann::json placement = nlohmann::json::array();
    for (const Coord& c : rep.placement()) placement.push_back({c.x, c.y});
    j = nlohmann::json{{"n", rep.side()}, {"placement", std::move(placement)}};
}

Representation representation_from_json(const nlohmann::json& j) {
    const int n = j.at("n").get<int>();
    std::vector<Coord> placement;
    for (const auto& p : j.at("placement")) {
        if (!p.is_array() || p.size() != 2) throw Error(ErrorKind::validation, "placement entry must be [x, y]");
        placement.push_back({p[0].get<int>(), p[1].get<int>()});
    }
    return Representation(n, std::move(placement));
}

void to_json(nlohmann::json& j, const TrueLabels& labels) {
    j = labels.labels();
}

}  // namespace alignteach

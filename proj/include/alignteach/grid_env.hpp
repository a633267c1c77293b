#pragma once

// Grid stimulus space: stimuli are the cells of an n x n lattice, identified
// in row-major order (id = y * n + x) of the canonical placement. A
// Representation places every stimulus at a distinct lattice coordinate;
// teachers and students differ only in their placements.

#include <nlohmann/json_fwd.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "alignteach/rng.hpp"

namespace alignteach {

using StimulusId = int;
using Category = int;

enum class Labeling { columns, rows, quadrants };

std::string_view to_string(Labeling labeling);
Labeling parse_labeling(std::string_view text);

class GridSpec {
public:
    GridSpec(int side, Labeling labeling);

    int side() const noexcept { return side_; }
    Labeling labeling() const noexcept { return labeling_; }
    int categories() const noexcept;
    int stimuli() const noexcept { return side_ * side_; }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;

private:
    int side_;
    Labeling labeling_;
};

struct Coord {
    int x = 0;
    int y = 0;
    friend bool operator==(const Coord&, const Coord&) = default;
};

inline int squared_distance(Coord a, Coord b) {
    const int dx = a.x - b.x;
    const int dy = a.y - b.y;
    return dx * dx + dy * dy;
}

class Representation {
public:
    // Identity placement: stimulus id = y * n + x sits at (x, y).
    static Representation canonical(int side);

    // Validates that the placement is a bijection onto the side x side lattice.
    Representation(int side, std::vector<Coord> placement);

    int side() const noexcept { return side_; }
    int size() const noexcept { return static_cast<int>(placement_.size()); }
    Coord at(StimulusId id) const { return placement_[static_cast<std::size_t>(id)]; }
    const std::vector<Coord>& placement() const noexcept { return placement_; }

    friend bool operator==(const Representation&, const Representation&) = default;

private:
    int side_;
    std::vector<Coord> placement_;
};

bool is_bijection(int side, const std::vector<Coord>& placement);

class TrueLabels {
public:
    TrueLabels(std::vector<Category> labels, int categories);

    Category operator[](StimulusId id) const { return labels_[static_cast<std::size_t>(id)]; }
    int categories() const noexcept { return categories_; }
    int size() const noexcept { return static_cast<int>(labels_.size()); }
    const std::vector<Category>& labels() const noexcept { return labels_; }

    friend bool operator==(const TrueLabels&, const TrueLabels&) = default;

private:
    std::vector<Category> labels_;
    int categories_;
};

TrueLabels true_labels(const GridSpec& spec);

struct CorruptionTrace {
    Representation result;
    int marked = 0;
    int swapped_pairs = 0;
};

// Marks each stimulus independently with probability `level`, shuffles the
// marked set and swaps coordinates pairwise. An odd leftover stays put.
CorruptionTrace corrupt_with_trace(const Representation& base, double level, Rng& rng);
Representation corrupt_representation(const Representation& base, double level, Rng& rng);

// Pearson correlation of the upper-triangle pairwise Euclidean distances
// (pairs i < j in stimulus-id order).
double alignment(const Representation& a, const Representation& b);

void to_json(nlohmann::json& j, const GridSpec& spec);
GridSpec grid_spec_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const Representation& rep);
Representation representation_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const TrueLabels& labels);

}  // namespace alignteach

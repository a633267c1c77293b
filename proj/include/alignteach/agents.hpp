#pragma once

// Teachers, the 1-NN student and outcome scoring.

#include <nlohmann/json_fwd.hpp>
#include <span>
#include <vector>

#include "alignteach/grid_env.hpp"
#include "alignteach/rng.hpp"

namespace alignteach {

// A teacher's possibly erroneous view of the label function.
struct BeliefLabels {
    std::vector<Category> labels;
    int categories = 0;
    double epsilon = 0.0;

    Category operator[](StimulusId id) const { return labels[static_cast<std::size_t>(id)]; }
    int size() const noexcept { return static_cast<int>(labels.size()); }
};

// Flips each label with probability epsilon to a uniformly chosen different
// category.
BeliefLabels sample_beliefs(const TrueLabels& truth, double epsilon, Rng& rng);

// Error-free beliefs (epsilon = 0) without touching a random stream.
BeliefLabels exact_beliefs(const TrueLabels& truth);

enum class TeacherKind { self_centered, student_centric };

struct TeacherConfig {
    Representation representation;
    double error_rate = 0.0;
    TeacherKind kind = TeacherKind::self_centered;
};

struct TeachingItem {
    StimulusId stimulus = 0;
    Category label = 0;
    friend bool operator==(const TeachingItem&, const TeachingItem&) = default;
};

struct TeachingSet {
    std::vector<TeachingItem> items;
    // Categories the teacher could not teach because no stimulus carried
    // that believed label.
    std::vector<Category> missing_categories;

    bool empty() const noexcept { return items.empty(); }
    int size() const noexcept { return static_cast<int>(items.size()); }
    bool reveals(StimulusId id) const;

    friend bool operator==(const TeachingSet& a, const TeachingSet& b) { return a.items == b.items; }
};

// Centroid teacher: per believed category, the member closest to the
// category's mean coordinate in the teacher's own representation.
TeachingSet select_self_centered(const TeacherConfig& teacher, const BeliefLabels& beliefs);

struct Predictions {
    std::vector<StimulusId> stimuli;  // unrevealed stimuli, ascending
    std::vector<Category> labels;
};

// Exact-distance ties go to the revealed stimulus with the smallest id.
Predictions classify_1nn(const Representation& student, const TeachingSet& set);

// Fraction of unrevealed stimuli whose prediction matches `truth`.
double evaluate(const Predictions& predictions, const TrueLabels& truth, const TeachingSet& set);

// Fused classify + evaluate. `reference` is any labeling indexed by stimulus
// (true labels or a teacher's beliefs). Returns the number of correct
// unrevealed stimuli; divide by (stimuli - set.size()) for accuracy.
int count_correct_1nn(const Representation& student, const TeachingSet& set,
                      std::span<const Category> reference);

double accuracy_1nn(const Representation& student, const TeachingSet& set,
                    std::span<const Category> reference);

struct CentricSelection {
    TeachingSet set;
    double score = 0.0;  // mean believed accuracy over the classroom
    int best_iteration = 0;
};

inline constexpr int kDefaultInnerIterations = 100;

// Random search over one-per-believed-category candidate sets, scored by
// mean 1-NN accuracy of the classroom against the teacher's beliefs.
CentricSelection select_student_centric(const BeliefLabels& beliefs,
                                        std::span<const Representation> classroom,
                                        int t_iters, Rng& rng);

// Draws one stimulus per believed category, uniformly among its members.
TeachingSet sample_candidate_set(const BeliefLabels& beliefs,
                                 const std::vector<std::vector<StimulusId>>& members, Rng& rng);

std::vector<std::vector<StimulusId>> believed_members(const BeliefLabels& beliefs);

void to_json(nlohmann::json& j, const TeachingSet& set);
TeachingSet teaching_set_from_json(const nlohmann::json& j);

}  // namespace alignteach

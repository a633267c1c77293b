#include "alignteach/agents.hpp"

#include <algorithm>
#include <limits>
#include <nlohmann/json.hpp>

#include "alignteach/error.hpp"

namespace alignteach {

BeliefLabels sample_beliefs(const TrueLabels& truth, double epsilon, Rng& rng) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw Error(ErrorKind::range, "error rate must lie in [0, 1]");
    const int k = truth.categories();
    if (k < 2 && epsilon > 0.0)
        throw Error(ErrorKind::no_alternative, "cannot flip labels with fewer than two categories");
    BeliefLabels beliefs{truth.labels(), k, epsilon};
    for (Category& label : beliefs.labels) {
        if (uniform01(rng) < epsilon) {
            // Uniform over the k - 1 other categories.
            const int draw = uniform_index(rng, k - 1);
            label = draw >= label ? draw + 1 : draw;
        }
    }
    return beliefs;
}

BeliefLabels exact_beliefs(const TrueLabels& truth) {
    return BeliefLabels{truth.labels(), truth.categories(), 0.0};
}

bool TeachingSet::reveals(StimulusId id) const {
    return std::any_of(items.begin(), items.end(), [id](const TeachingItem& it) { return it.stimulus == id; });
}

std::vector<std::vector<StimulusId>> believed_members(const BeliefLabels& beliefs) {
    std::vector<std::vector<StimulusId>> members(static_cast<std::size_t>(beliefs.categories));
    for (StimulusId id = 0; id < beliefs.size(); ++id)
        members[static_cast<std::size_t>(beliefs[id])].push_back(id);
    return members;
}

TeachingSet select_self_centered(const TeacherConfig& teacher, const BeliefLabels& beliefs) {
    if (teacher.kind != TeacherKind::self_centered)
        throw Error(ErrorKind::precondition, "centroid selection requires a self-centered teacher");
    if (teacher.representation.size() != beliefs.size())
        throw Error(ErrorKind::dimension, "teacher representation and beliefs cover different grids");
    const auto members = believed_members(beliefs);
    const Representation& rep = teacher.representation;
    TeachingSet set;
    for (Category c = 0; c < beliefs.categories; ++c) {
        const auto& ids = members[static_cast<std::size_t>(c)];
        if (ids.empty()) {
            set.missing_categories.push_back(c);
            continue;
        }
        // Compare count^2 * squared distance in integers to avoid dividing
        // the centroid: |m * p - sum|^2.
        long long sx = 0, sy = 0;
        for (StimulusId id : ids) {
            sx += rep.at(id).x;
            sy += rep.at(id).y;
        }
        const long long m = static_cast<long long>(ids.size());
        StimulusId best = ids.front();
        long long best_d = std::numeric_limits<long long>::max();
        for (StimulusId id : ids) {  // ascending ids, strict < keeps the smallest on ties
            const long long dx = m * rep.at(id).x - sx;
            const long long dy = m * rep.at(id).y - sy;
            const long long d = dx * dx + dy * dy;
            if (d < best_d) {
                best_d = d;
                best = id;
            }
        }
        set.items.push_back({best, c});
    }
    return set;
}

namespace {

struct RevealedPoint {
    Coord at;
    Category label;
    StimulusId id;
};

std::vector<RevealedPoint> revealed_points(const Representation& student, const TeachingSet& set) {
    std::vector<RevealedPoint> pts;
    pts.reserve(set.items.size());
    for (const auto& it : set.items) {
        if (it.stimulus < 0 || it.stimulus >= student.size())
            throw Error(ErrorKind::dimension, "revealed stimulus outside the grid");
        pts.push_back({student.at(it.stimulus), it.label, it.stimulus});
    }
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return pts;
}

inline Category nearest_label(const std::vector<RevealedPoint>& pts, Coord p) {
    int best_d = std::numeric_limits<int>::max();
    Category best = pts.front().label;
    for (const auto& r : pts) {
        const int d = squared_distance(r.at, p);
        if (d < best_d) {
            best_d = d;
            best = r.label;
        }
    }
    return best;
}

std::vector<char> revealed_mask(int stimuli, const TeachingSet& set) {
    std::vector<char> mask(static_cast<std::size_t>(stimuli), 0);
    for (const auto& it : set.items) mask[static_cast<std::size_t>(it.stimulus)] = 1;
    return mask;
}

}  // namespace

Predictions classify_1nn(const Representation& student, const TeachingSet& set) {
    if (set.empty()) throw Error(ErrorKind::cannot_classify, "teaching set is empty");
    const auto pts = revealed_points(student, set);
    const auto mask = revealed_mask(student.size(), set);
    Predictions out;
    for (StimulusId id = 0; id < student.size(); ++id) {
        if (mask[static_cast<std::size_t>(id)]) continue;
        out.stimuli.push_back(id);
        out.labels.push_back(nearest_label(pts, student.at(id)));
    }
    return out;
}

double evaluate(const Predictions& predictions, const TrueLabels& truth, const TeachingSet& set) {
    if (predictions.stimuli.size() != predictions.labels.size())
        throw Error(ErrorKind::evaluation, "prediction ids and labels differ in length");
    const auto mask = revealed_mask(truth.size(), set);
    std::vector<char> covered(mask.size(), 0);
    for (StimulusId id : predictions.stimuli) {
        if (id < 0 || id >= truth.size() || mask[static_cast<std::size_t>(id)] ||
            covered[static_cast<std::size_t>(id)])
            throw Error(ErrorKind::evaluation, "predictions must cover exactly the unrevealed stimuli");
        covered[static_cast<std::size_t>(id)] = 1;
    }
    const auto unrevealed = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 0));
    if (predictions.stimuli.size() != unrevealed)
        throw Error(ErrorKind::evaluation, "predictions must cover exactly the unrevealed stimuli");
    if (unrevealed == 0) throw Error(ErrorKind::evaluation, "no unrevealed stimuli to score");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.stimuli.size(); ++i)
        if (predictions.labels[i] == truth[predictions.stimuli[i]]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(unrevealed);
}

int count_correct_1nn(const Representation& student, const TeachingSet& set,
                      std::span<const Category> reference) {
    if (set.empty()) throw Error(ErrorKind::cannot_classify, "teaching set is empty");
    // Hot path: fixed-capacity buffers, no allocation.
    constexpr std::size_t kMaxRevealed = 64;
    if (set.items.size() > kMaxRevealed) {
        const auto p = classify_1nn(student, set);
        int correct = 0;
        for (std::size_t i = 0; i < p.stimuli.size(); ++i)
            if (p.labels[i] == reference[static_cast<std::size_t>(p.stimuli[i])]) ++correct;
        return correct;
    }
    RevealedPoint pts[kMaxRevealed];
    const std::size_t m = set.items.size();
    for (std::size_t i = 0; i < m; ++i) {
        const auto& it = set.items[i];
        pts[i] = {student.at(it.stimulus), it.label, it.stimulus};
    }
    std::sort(pts, pts + m, [](const auto& a, const auto& b) { return a.id < b.id; });
    int correct = 0;
    std::size_t next_revealed = 0;
    for (StimulusId id = 0; id < student.size(); ++id) {
        if (next_revealed < m && pts[next_revealed].id == id) {
            ++next_revealed;
            continue;
        }
        const Coord p = student.at(id);
        int best_d = std::numeric_limits<int>::max();
        Category best = 0;
        for (std::size_t r = 0; r < m; ++r) {
            const int d = squared_distance(pts[r].at, p);
            if (d < best_d) {
                best_d = d;
                best = pts[r].label;
            }
        }
        if (best == reference[static_cast<std::size_t>(id)]) ++correct;
    }
    return correct;
}

double accuracy_1nn(const Representation& student, const TeachingSet& set,
                    std::span<const Category> reference) {
    const int unrevealed = student.size() - set.size();
    if (unrevealed <= 0) throw Error(ErrorKind::evaluation, "no unrevealed stimuli to score");
    return static_cast<double>(count_correct_1nn(student, set, reference)) / unrevealed;
}

TeachingSet sample_candidate_set(const BeliefLabels& beliefs,
                                 const std::vector<std::vector<StimulusId>>& members, Rng& rng) {
    TeachingSet set;
    for (Category c = 0; c < beliefs.categories; ++c) {
        const auto& ids = members[static_cast<std::size_t>(c)];
        if (ids.empty()) {
            set.missing_categories.push_back(c);
            continue;
        }
        set.items.push_back({ids[static_cast<std::size_t>(uniform_index(rng, static_cast<int>(ids.size())))], c});
    }
    return set;
}

CentricSelection select_student_centric(const BeliefLabels& beliefs,
                                        std::span<const Representation> classroom,
                                        int t_iters, Rng& rng) {
    if (classroom.empty()) throw Error(ErrorKind::precondition, "student-centric teacher needs a classroom");
    if (t_iters < 1) throw Error(ErrorKind::precondition, "inner iterations must be >= 1");
    const auto members = believed_members(beliefs);
    CentricSelection best;
    long long best_correct = -1;
    for (int it = 0; it < t_iters; ++it) {
        TeachingSet candidate = sample_candidate_set(beliefs, members, rng);
        // Every student scores over the same unrevealed count, so the
        // integer total orders candidates exactly like the mean does.
        long long correct = 0;
        for (const auto& student : classroom) correct += count_correct_1nn(student, candidate, beliefs.labels);
        if (correct > best_correct) {
            best_correct = correct;
            best.set = std::move(candidate);
            best.best_iteration = it;
        }
    }
    const double unrevealed = static_cast<double>(beliefs.size() - best.set.size());
    best.score = static_cast<double>(best_correct) / (unrevealed * static_cast<double>(classroom.size()));
    return best;
}

void to_json(nlohmann::json& j, const TeachingSet& set) {
    j = nlohmann::json::array();
    for (const auto& it : set.items) j.push_back({{"stimulus", it.stimulus}, {"label", it.label}});
}

TeachingSet teaching_set_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw Error(ErrorKind::validation, "teaching set must be a JSON array");
    TeachingSet set;
    for (const auto& item : j) set.items.push_back({item.at("stimulus").get<int>(), item.at("label").get<int>()});
    return set;
}

}  // namespace alignteach

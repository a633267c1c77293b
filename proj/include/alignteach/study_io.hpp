#pragma once

// Condition/response files for the human category-learning task and the
// analyses run on collected responses.

#include <array>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alignteach/agents.hpp"
#include "alignteach/grid_env.hpp"

namespace alignteach::study {

inline constexpr int kFormatVersion = 1;
inline constexpr int kGlyphFeatures = 9;
inline constexpr int kConfidenceMin = 1;
inline constexpr int kConfidenceMax = 7;

enum class StimulusKind { simple_features, salient_dinos };

std::string_view to_string(StimulusKind kind);
StimulusKind parse_stimulus_kind(std::string_view text);

using GlyphFeatures = std::array<double, kGlyphFeatures>;

struct ConditionFile {
    std::string condition_id;
    GridSpec spec{6, Labeling::columns};
    StimulusKind stimulus_kind = StimulusKind::simple_features;
    std::vector<std::string> category_names;
    TeachingSet revealed;
    double target_alignment = 1.0;
    double teacher_alignment = 1.0;
    std::vector<GlyphFeatures> glyphs;  // one per stimulus, dinos only
    std::optional<Representation> teacher_representation;

    // Throws validation errors for broken invariants.
    void validate() const;
};

struct ResponseChoice {
    StimulusId stimulus = 0;
    Category category = 0;
    friend bool operator==(const ResponseChoice&, const ResponseChoice&) = default;
};

struct ResponseFile {
    std::string condition_id;
    std::string participant_id;
    std::vector<ResponseChoice> choices;
    int confidence = 4;
    std::string started_at;
    std::string submitted_at;
};

nlohmann::json to_json(const ConditionFile& c);
ConditionFile condition_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ResponseFile& r);
ResponseFile response_from_json(const nlohmann::json& j);

std::vector<std::string> category_names(int k);

// First two features track canonical x and y in [0, 1]; the other seven sit
// at mid-range.
GlyphFeatures glyph_for(const GridSpec& spec, StimulusId id);

struct ExportOptions {
    int alignment_levels = 6;
    double tolerance = 0.05;
    int max_attempts = 1000;
};

// Target levels run from 1.0 down to 0.0 in equal steps.
std::vector<double> alignment_targets(int levels);

// One zero-error self-centered teacher per alignment level (shared across
// structures), one ConditionFile per (structure, level).
std::vector<ConditionFile> export_conditions(int grid_side, StimulusKind kind, std::span<const Labeling> structures,
                                             const ExportOptions& options, Rng& rng);

// Throws a coverage or validation error if `response` does not fit `condition`.
void validate_response(const ConditionFile& condition, const ResponseFile& response);

double response_accuracy(const ConditionFile& condition, const ResponseFile& response);

enum class RejectionReason { malformed, unknown_condition, coverage_mismatch, invalid_category, invalid_confidence };

std::string_view to_string(RejectionReason reason);

struct Rejection {
    std::string source;
    RejectionReason reason;
    std::string message;
};

struct ParticipantScore {
    std::string source;
    std::string participant_id;
    std::string condition_id;
    double accuracy = 0.0;
    int confidence = 0;
};

struct ConditionSummary {
    std::string condition_id;
    double teacher_alignment = 0.0;
    int participants = 0;
    double mean_accuracy = 0.0;
    double stderr_accuracy = 0.0;
    double mean_confidence = 0.0;
};

struct IngestResult {
    std::vector<ParticipantScore> participants;
    std::vector<ConditionSummary> conditions;  // conditions with >= 1 accepted file
    std::vector<Rejection> rejected;
};

struct NamedDocument {
    std::string name;
    nlohmann::json document;
};

// Bad files are rejected individually; the rest still count.
IngestResult ingest_responses(std::span<const ConditionFile> conditions, std::span<const NamedDocument> responses);

struct PosthocSubject {
    std::string participant_id;
    std::vector<ResponseChoice> choices;
};

struct PosthocCell {
    double epsilon = 0.0;
    double mean_accuracy = 0.0;
    double stderr_accuracy = 0.0;  // Monte Carlo error over seeds
};

// For each seed, flip the true labels as a teacher with error epsilon would
// and rescore. Result is [subject][epsilon].
std::vector<std::vector<PosthocCell>> posthoc_error(std::span<const PosthocSubject> subjects, const TrueLabels& truth,
                                                    std::span<const double> epsilons, int seeds, std::uint64_t seed);

struct RegressionResult {
    double slope = 0.0;
    double intercept = 0.0;
    double pearson_r = 0.0;
    double p_value = 1.0;  // two-sided, permutation test
    int points = 0;
    int permutations = 0;
};

struct AlignmentPoint {
    double alignment = 0.0;
    double accuracy = 0.0;
};

RegressionResult regress_alignment_accuracy(std::span<const AlignmentPoint> points, int permutations, Rng& rng);

// A 1-NN participant with the given representation answering `condition`.
ResponseFile simulate_participant(const ConditionFile& condition, const Representation& student,
                                  const std::string& participant_id);

}  // namespace alignteach::study

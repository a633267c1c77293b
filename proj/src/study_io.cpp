#include "alignteach/study_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>

#include "alignteach/error.hpp"
#include "alignteach/stats.hpp"

namespace alignteach::study {

using nlohmann::json;

std::string_view to_string(StimulusKind kind) {
    return kind == StimulusKind::simple_features ? "simple_features" : "salient_dinos";
}

StimulusKind parse_stimulus_kind(std::string_view text) {
    if (text == "simple_features") return StimulusKind::simple_features;
    if (text == "salient_dinos") return StimulusKind::salient_dinos;
    throw Error(ErrorKind::validation, "unknown stimulus kind '" + std::string(text) + "'");
}

std::string_view to_string(RejectionReason reason) {
    switch (reason) {
        case RejectionReason::malformed: return "malformed";
        case RejectionReason::unknown_condition: return "unknown_condition";
        case RejectionReason::coverage_mismatch: return "coverage_mismatch";
        case RejectionReason::invalid_category: return "invalid_category";
        case RejectionReason::invalid_confidence: return "invalid_confidence";
    }
    return "unknown";
}

std::vector<std::string> category_names(int k) {
    std::vector<std::string> names;
    for (int i = 0; i < k; ++i) names.emplace_back(1, static_cast<char>('A' + i));
    return names;
}

GlyphFeatures glyph_for(const GridSpec& spec, StimulusId id) {
    const double span = static_cast<double>(spec.side() - 1);
    GlyphFeatures g;
    g.fill(0.5);
    g[0] = static_cast<double>(id % spec.side()) / span;
    g[1] = static_cast<double>(id / spec.side()) / span;
    return g;
}

void ConditionFile::validate() const {
    const int k = spec.categories();
    if (static_cast<int>(category_names.size()) != k)
        throw Error(ErrorKind::validation, condition_id + ": category names do not match k");
    if (revealed.empty()) throw Error(ErrorKind::validation, condition_id + ": no revealed stimuli");
    std::vector<char> seen(static_cast<std::size_t>(spec.stimuli()), 0);
    for (const auto& it : revealed.items) {
        if (it.stimulus < 0 || it.stimulus >= spec.stimuli())
            throw Error(ErrorKind::validation, condition_id + ": revealed stimulus outside the grid");
        if (it.label < 0 || it.label >= k)
            throw Error(ErrorKind::validation, condition_id + ": revealed label is not a valid category");
        if (seen[static_cast<std::size_t>(it.stimulus)]++)
            throw Error(ErrorKind::validation, condition_id + ": stimulus revealed twice");
    }
    const bool dinos = stimulus_kind == StimulusKind::salient_dinos;
    if (dinos && static_cast<int>(glyphs.size()) != spec.stimuli())
        throw Error(ErrorKind::validation, condition_id + ": dino conditions need one glyph per stimulus");
    if (!dinos && !glyphs.empty())
        throw Error(ErrorKind::validation, condition_id + ": glyphs are only valid for salient_dinos");
}

json to_json(const ConditionFile& c) {
    json j{{"format_version", kFormatVersion},
           {"condition_id", c.condition_id},
           {"grid", c.spec},
           {"stimulus_kind", std::string(to_string(c.stimulus_kind))},
           {"category_names", c.category_names},
           {"revealed", c.revealed},
           {"target_alignment", c.target_alignment},
           {"teacher_alignment", c.teacher_alignment},
           {"confidence_scale", {kConfidenceMin, kConfidenceMax}}};
    if (c.stimulus_kind == StimulusKind::salient_dinos) {
        json glyphs = json::array();
        for (const auto& g : c.glyphs) glyphs.push_back(g);
        j["glyphs"] = std::move(glyphs);
    }
    if (c.teacher_representation) j["teacher_representation"] = *c.teacher_representation;
    return j;
}

ConditionFile condition_from_json(const json& j) {
    try {
        if (j.at("format_version").get<int>() != kFormatVersion)
            throw Error(ErrorKind::validation, "unsupported condition format_version");
        ConditionFile c;
        c.condition_id = j.at("condition_id").get<std::string>();
        c.spec = grid_spec_from_json(j.at("grid"));
        c.stimulus_kind = parse_stimulus_kind(j.at("stimulus_kind").get<std::string>());
        c.category_names = j.at("category_names").get<std::vector<std::string>>();
        c.revealed = teaching_set_from_json(j.at("revealed"));
        c.target_alignment = j.at("target_alignment").get<double>();
        c.teacher_alignment = j.at("teacher_alignment").get<double>();
        if (j.contains("glyphs"))
            for (const auto& g : j.at("glyphs")) c.glyphs.push_back(g.get<GlyphFeatures>());
        if (j.contains("teacher_representation"))
            c.teacher_representation = representation_from_json(j.at("teacher_representation"));
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::validation, std::string("malformed condition file: ") + e.what());
    }
}

json to_json(const ResponseFile& r) {
    json choices = json::array();
    for (const auto& c : r.choices) choices.push_back({{"stimulus", c.stimulus}, {"category", c.category}});
    return {{"format_version", kFormatVersion}, {"condition_id", r.condition_id}, {"participant_id", r.participant_id},
            {"responses", choices},          {"confidence", r.confidence},     {"started_at", r.started_at},
            {"submitted_at", r.submitted_at}};
}

ResponseFile response_from_json(const json& j) {
    try {
        if (j.at("format_version").get<int>() != kFormatVersion)
            throw Error(ErrorKind::validation, "unsupported response format_version");
        ResponseFile r;
        r.condition_id = j.at("condition_id").get<std::string>();
        r.participant_id = j.at("participant_id").get<std::string>();
        for (const auto& c : j.at("responses"))
            r.choices.push_back({c.at("stimulus").get<int>(), c.at("category").get<int>()});
        r.confidence = j.at("confidence").get<int>();
        r.started_at = j.value("started_at", "");
        r.submitted_at = j.value("submitted_at", "");
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::validation, std::string("malformed response file: ") + e.what());
    }
}

std::vector<double> alignment_targets(int levels) {
    if (levels < 1) throw Error(ErrorKind::precondition, "need at least one alignment level");
    if (levels == 1) return {1.0};
    std::vector<double> out;
    for (int i = 0; i < levels; ++i) out.push_back(1.0 - static_cast<double>(i) / (levels - 1));
    return out;
}

std::vector<ConditionFile> export_conditions(int grid_side, StimulusKind kind, std::span<const Labeling> structures,
                                             const ExportOptions& options, Rng& rng) {
    const auto targets = alignment_targets(options.alignment_levels);
    const Representation canonical = Representation::canonical(grid_side);
    std::vector<ConditionFile> out;
    for (std::size_t level = 0; level < targets.size(); ++level) {
        const double target = targets[level];
        // First attempt aims straight at the target; later ones draw the
        // corruption level uniformly.
        std::optional<Representation> teacher;
        double achieved = 0.0;
        for (int attempt = 0; attempt < options.max_attempts && !teacher; ++attempt) {
            const double level_c = attempt == 0 ? std::clamp(1.0 - target, 0.0, 1.0) : uniform01(rng);
            Representation candidate = corrupt_representation(canonical, level_c, rng);
            const double a = alignment(canonical, candidate);
            if (std::abs(a - target) <= options.tolerance) {
                teacher = std::move(candidate);
                achieved = a;
            }
        }
        if (!teacher) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.3f", target);
            throw Error(ErrorKind::sampling, std::string("could not reach alignment level ") + buf + " within " +
                                                 std::to_string(options.max_attempts) + " attempts");
        }
        for (Labeling structure : structures) {
            const GridSpec spec(grid_side, structure);
            const TeacherConfig cfg{*teacher, 0.0, TeacherKind::self_centered};
            ConditionFile c;
            c.condition_id = std::string(to_string(kind)) + "_" + std::string(to_string(structure)) + "_a" +
                             std::to_string(level);
            c.spec = spec;
            c.stimulus_kind = kind;
            c.category_names = category_names(spec.categories());
            c.revealed = select_self_centered(cfg, exact_beliefs(true_labels(spec)));
            c.target_alignment = target;
            c.teacher_alignment = achieved;
            if (kind == StimulusKind::salient_dinos)
                for (StimulusId id = 0; id < spec.stimuli(); ++id) c.glyphs.push_back(glyph_for(spec, id));
            c.teacher_representation = *teacher;
            out.push_back(std::move(c));
        }
    }
    return out;
}

void validate_response(const ConditionFile& condition, const ResponseFile& response) {
    if (response.condition_id != condition.condition_id)
        throw Error(ErrorKind::validation, "response is for condition '" + response.condition_id + "'");
    if (response.confidence < kConfidenceMin || response.confidence > kConfidenceMax)
        throw Error(ErrorKind::validation, "confidence must be in [1, 7]");
    const int n = condition.spec.stimuli();
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    for (const auto& it : condition.revealed.items) seen[static_cast<std::size_t>(it.stimulus)] = 2;
    for (const auto& c : response.choices) {
        if (c.stimulus < 0 || c.stimulus >= n)
            throw Error(ErrorKind::coverage, "response names stimulus " + std::to_string(c.stimulus) + " outside the grid");
        char& s = seen[static_cast<std::size_t>(c.stimulus)];
        if (s == 2) throw Error(ErrorKind::coverage, "response labels revealed stimulus " + std::to_string(c.stimulus));
        if (s == 1) throw Error(ErrorKind::coverage, "stimulus " + std::to_string(c.stimulus) + " answered twice");
        s = 1;
        if (c.category < 0 || c.category >= condition.spec.categories())
            throw Error(ErrorKind::validation, "invalid category " + std::to_string(c.category));
    }
    const auto missing = std::count(seen.begin(), seen.end(), 0);
    if (missing > 0) throw Error(ErrorKind::coverage, std::to_string(missing) + " unrevealed stimuli unanswered");
}

double response_accuracy(const ConditionFile& condition, const ResponseFile& response) {
    validate_response(condition, response);
    const TrueLabels truth = true_labels(condition.spec);
    std::size_t correct = 0;
    for (const auto& c : response.choices)
        if (truth[c.stimulus] == c.category) ++correct;
    return static_cast<double>(correct) / static_cast<double>(response.choices.size());
}

IngestResult ingest_responses(std::span<const ConditionFile> conditions, std::span<const NamedDocument> responses) {
    std::map<std::string, const ConditionFile*> by_id;
    for (const auto& c : conditions) by_id.emplace(c.condition_id, &c);
    IngestResult result;
    std::map<std::string, std::vector<const ParticipantScore*>> grouped;
    for (const auto& doc : responses) {
        ResponseFile r;
        try {
            r = response_from_json(doc.document);
        } catch (const Error& e) {
            result.rejected.push_back({doc.name, RejectionReason::malformed, e.what()});
            continue;
        }
        const auto it = by_id.find(r.condition_id);
        if (it == by_id.end()) {
            result.rejected.push_back({doc.name, RejectionReason::unknown_condition,
                                       "unknown condition id '" + r.condition_id + "'"});
            continue;
        }
        try {
            const double acc = response_accuracy(*it->second, r);
            result.participants.push_back({doc.name, r.participant_id, r.condition_id, acc, r.confidence});
        } catch (const Error& e) {
            RejectionReason reason = RejectionReason::coverage_mismatch;
            if (e.kind() == ErrorKind::validation)
                reason = std::string(e.what()).find("confidence") != std::string::npos ? RejectionReason::invalid_confidence
                                                                                       : RejectionReason::invalid_category;
            result.rejected.push_back({doc.name, reason, e.what()});
        }
    }
    for (const auto& p : result.participants) grouped[p.condition_id].push_back(&p);
    for (const auto& c : conditions) {
        const auto g = grouped.find(c.condition_id);
        if (g == grouped.end()) continue;
        std::vector<double> acc, conf;
        for (const auto* p : g->second) {
            acc.push_back(p->accuracy);
            conf.push_back(static_cast<double>(p->confidence));
        }
        result.conditions.push_back({c.condition_id, c.teacher_alignment, static_cast<int>(acc.size()), stats::mean(acc),
                                     stats::standard_error(acc), stats::mean(conf)});
    }
    return result;
}

std::vector<std::vector<PosthocCell>> posthoc_error(std::span<const PosthocSubject> subjects, const TrueLabels& truth,
                                                    std::span<const double> epsilons, int seeds, std::uint64_t seed) {
    if (seeds < 1) throw Error(ErrorKind::precondition, "posthoc analysis needs at least one seed");
    for (double e : epsilons)
        if (!(e >= 0.0 && e <= 1.0)) throw Error(ErrorKind::range, "posthoc error rates must lie in [0, 1]");
    for (const auto& s : subjects) {
        if (s.choices.empty()) throw Error(ErrorKind::precondition, s.participant_id + " has no responses");
        for (const auto& c : s.choices)
            if (c.stimulus < 0 || c.stimulus >= truth.size())
                throw Error(ErrorKind::coverage, s.participant_id + " answers a stimulus outside the grid");
    }
    std::vector<std::vector<PosthocCell>> out(subjects.size());
    for (std::size_t ei = 0; ei < epsilons.size(); ++ei) {
        std::vector<std::vector<double>> samples(subjects.size());
        std::vector<long long> correct_total(subjects.size(), 0);
        for (int k = 0; k < seeds; ++k) {
            Rng rng = make_rng(seed, {0x5051, ei, static_cast<std::uint64_t>(k)});
            // Flipped truth is shared by all subjects for this seed, as one
            // erroneous teacher would be.
            const BeliefLabels flipped = sample_beliefs(truth, epsilons[ei], rng);
            for (std::size_t s = 0; s < subjects.size(); ++s) {
                std::size_t correct = 0;
                for (const auto& c : subjects[s].choices)
                    if (flipped[c.stimulus] == c.category) ++correct;
                correct_total[s] += static_cast<long long>(correct);
                samples[s].push_back(static_cast<double>(correct) / static_cast<double>(subjects[s].choices.size()));
            }
        }
        for (std::size_t s = 0; s < subjects.size(); ++s) {
            // Mean from the integer total, so epsilon = 0 reproduces the
            // plain accuracy bit for bit.
            const double answered = static_cast<double>(subjects[s].choices.size()) * seeds;
            out[s].push_back({epsilons[ei], static_cast<double>(correct_total[s]) / answered,
                              stats::standard_error(samples[s])});
        }
    }
    return out;
}

RegressionResult regress_alignment_accuracy(std::span<const AlignmentPoint> points, int permutations, Rng& rng) {
    if (points.size() < 3) throw Error(ErrorKind::insufficient_data, "regression needs at least 3 points");
    if (permutations < 0) throw Error(ErrorKind::precondition, "permutation count must be >= 0");
    // Canonical order makes every output independent of input order.
    std::vector<AlignmentPoint> sorted(points.begin(), points.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        return a.alignment != b.alignment ? a.alignment < b.alignment : a.accuracy < b.accuracy;
    });
    std::vector<double> x, y;
    for (const auto& p : sorted) {
        x.push_back(p.alignment);
        y.push_back(p.accuracy);
    }
    const double mx = stats::mean(x);
    const double my = stats::mean(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw Error(ErrorKind::degenerate_input, "degenerate regression: alignments have zero variance");
    if (syy == 0.0) throw Error(ErrorKind::degenerate_input, "degenerate regression: accuracies have zero variance");
    RegressionResult r;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    r.pearson_r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    r.points = static_cast<int>(x.size());
    r.permutations = permutations;
    // With x and the y multiset fixed, |r| is monotone in |sum (x - mx) y|.
    const double observed = std::abs(sxy);
    const double slack = 1e-12 * (std::abs(sxy) + 1.0);
    std::size_t extreme = 0;
    std::vector<double> shuffled = y;
    for (int p = 0; p < permutations; ++p) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * shuffled[i];
        if (std::abs(s) >= observed - slack) ++extreme;
    }
    r.p_value = static_cast<double>(extreme + 1) / static_cast<double>(permutations + 1);
    return r;
}

ResponseFile simulate_participant(const ConditionFile& condition, const Representation& student,
                                  const std::string& participant_id) {
    const Predictions p = classify_1nn(student, condition.revealed);
    ResponseFile r;
    r.condition_id = condition.condition_id;
    r.participant_id = participant_id;
    for (std::size_t i = 0; i < p.stimuli.size(); ++i) r.choices.push_back({p.stimuli[i], p.labels[i]});
    r.confidence = 4;
    r.started_at = "1970-01-01T00:00:00Z";
    r.submitted_at = "1970-01-01T00:00:00Z";
    return r;
}

}  // namespace alignteach::study

#include "alignteach/curves.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "alignteach/agents.hpp"
#include "alignteach/error.hpp"
#include "alignteach/parallel.hpp"
#include "alignteach/rng.hpp"
#include "alignteach/stats.hpp"

namespace alignteach {

namespace {

constexpr std::uint64_t kDyadicTeacherTag = 0xD1;
constexpr std::uint64_t kDyadicEpisodeTag = 0xD2;
constexpr std::uint64_t kClassTeacherTag = 0xC1;
constexpr std::uint64_t kClassStudentTag = 0xC2;
constexpr std::uint64_t kClassEpisodeTag = 0xC3;

constexpr double kBucketSlack = 1e-9;

std::size_t cell_index(int a, int e) {
    return static_cast<std::size_t>(e * CurveTable::kAlignmentBuckets + a);
}

void check_unit(const std::vector<double>& xs, const char* what) {
    for (double x : xs)
        if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorKind::config, std::string(what) + " must lie in [0, 1]");
}

}  // namespace

std::string_view to_string(CurveKind kind) {
    return kind == CurveKind::dyadic ? "dyadic" : "classroom";
}

CurveTable::CurveTable(CurveProvenance provenance) : provenance_(std::move(provenance)) {}

int CurveTable::alignment_bucket(double alignment) {
    const int b = static_cast<int>(std::floor((alignment + 1.0) * 10.0 + kBucketSlack));
    return std::clamp(b, 0, kAlignmentBuckets - 1);
}

int CurveTable::error_bucket(double error) {
    const int b = static_cast<int>(std::floor(error * 10.0 + kBucketSlack));
    return std::clamp(b, 0, kErrorBuckets - 1);
}

const CurveTable::Cell& CurveTable::cell(int a, int e) const {
    if (a < 0 || a >= kAlignmentBuckets || e < 0 || e >= kErrorBuckets)
        throw Error(ErrorKind::range, "curve bucket index out of range");
    return cells_[cell_index(a, e)];
}

void CurveTable::set_cell(int a, int e, Cell c) {
    if (a < 0 || a >= kAlignmentBuckets || e < 0 || e >= kErrorBuckets)
        throw Error(ErrorKind::range, "curve bucket index out of range");
    cells_[cell_index(a, e)] = c;
}

std::int64_t CurveTable::total_count() const {
    std::int64_t total = 0;
    for (const Cell& c : cells_) total += c.count;
    return total;
}

double CurveTable::lookup(double alignment, double error) const {
    if (!(alignment >= -1.0 && alignment <= 1.0)) throw Error(ErrorKind::range, "lookup alignment outside [-1, 1]");
    if (!(error >= 0.0 && error <= 1.0)) throw Error(ErrorKind::range, "lookup error rate outside [0, 1]");
    if (empty()) throw Error(ErrorKind::empty_curve, "curve has no populated buckets");
    const int a0 = alignment_bucket(alignment);
    const int e0 = error_bucket(error);
    if (populated(a0, e0)) return cell(a0, e0).mean;
    int best_a = -1, best_e = -1, best_d = std::numeric_limits<int>::max();
    // Scan error ascending, alignment descending; strict < keeps the first
    // (lowest error, highest alignment) bucket among equidistant ones.
    for (int e = 0; e < kErrorBuckets; ++e) {
        for (int a = kAlignmentBuckets - 1; a >= 0; --a) {
            if (!populated(a, e)) continue;
            const int d = (a - a0) * (a - a0) + (e - e0) * (e - e0);
            if (d < best_d) {
                best_d = d;
                best_a = a;
                best_e = e;
            }
        }
    }
    return cell(best_a, best_e).mean;
}

void CurveAccumulator::add(double alignment, double error, double accuracy) {
    const std::size_t i = cell_index(CurveTable::alignment_bucket(alignment), CurveTable::error_bucket(error));
    sums_[i] += accuracy;
    ++counts_[i];
}

CurveTable CurveAccumulator::finish(CurveProvenance provenance) const {
    CurveTable table(std::move(provenance));
    for (int e = 0; e < CurveTable::kErrorBuckets; ++e) {
        for (int a = 0; a < CurveTable::kAlignmentBuckets; ++a) {
            const std::size_t i = cell_index(a, e);
            if (counts_[i] == 0) continue;
            table.set_cell(a, e, {sums_[i] / static_cast<double>(counts_[i]), counts_[i]});
        }
    }
    return table;
}

std::vector<double> linear_steps(double lo, double hi, double step) {
    if (!(step > 0.0) || hi < lo) throw Error(ErrorKind::config, "invalid step range");
    const int count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(lo + i * step);
    return out;
}

SweepConfig SweepConfig::dyadic_defaults() {
    SweepConfig cfg;
    cfg.error_rates = linear_steps(0.0, 0.9, 0.1);
    cfg.corruption_levels = linear_steps(0.0, 1.0, 0.01);
    cfg.label_structures = {Labeling::columns, Labeling::quadrants};
    return cfg;
}

SweepConfig SweepConfig::classroom_defaults() {
    SweepConfig cfg;
    cfg.error_rates = linear_steps(0.0, 0.9, 0.1);
    cfg.corruption_levels = linear_steps(0.0, 1.0, 0.1);
    cfg.student_corruptions = linear_steps(0.0, 0.9, 0.1);
    cfg.label_structures = {Labeling::columns};
    return cfg;
}

void SweepConfig::validate() const {
    check_unit(error_rates, "error rates");
    check_unit(corruption_levels, "corruption levels");
    check_unit(student_corruptions, "student corruptions");
    if (seeds_per_point < 1) throw Error(ErrorKind::config, "seeds per point must be >= 1");
    if (error_rates.empty() || corruption_levels.empty() || label_structures.empty())
        throw Error(ErrorKind::config, "sweep axes must be non-empty");
}

std::int64_t SweepConfig::episode_count() const {
    const std::int64_t students = student_corruptions.empty() ? 1 : static_cast<std::int64_t>(student_corruptions.size());
    return static_cast<std::int64_t>(error_rates.size()) * static_cast<std::int64_t>(corruption_levels.size()) *
           static_cast<std::int64_t>(seeds_per_point) * static_cast<std::int64_t>(label_structures.size()) * students;
}

DyadicCurves build_dyadic_curve(const GridSpec& spec, const SweepConfig& cfg) {
    cfg.validate();
    if (!cfg.student_corruptions.empty())
        throw Error(ErrorKind::config, "dyadic sweeps use the identity student; student corruptions must be empty");
    const Representation student = Representation::canonical(spec.side());
    const std::size_t n_err = cfg.error_rates.size();
    const std::size_t n_cor = cfg.corruption_levels.size();
    const std::size_t n_seed = static_cast<std::size_t>(cfg.seeds_per_point);
    const std::size_t per_structure = n_err * n_cor * n_seed;

    // Teachers depend only on the corruption index, so every error rate and
    // label structure sees the same teacher population.
    std::vector<Representation> teachers;
    std::vector<double> teacher_alignment;
    teachers.reserve(n_cor);
    for (std::size_t c = 0; c < n_cor; ++c) {
        Rng rng = make_rng(cfg.master_seed, {kDyadicTeacherTag, c});
        teachers.push_back(corrupt_representation(student, cfg.corruption_levels[c], rng));
        teacher_alignment.push_back(alignment(student, teachers.back()));
    }

    CurveProvenance prov{CurveKind::dyadic, spec.side(), cfg.label_structures, cfg.master_seed};
    DyadicCurves out{CurveTable(prov), {}};
    CurveAccumulator pooled;
    for (Labeling structure : cfg.label_structures) {
        const TrueLabels truth = true_labels(GridSpec(spec.side(), structure));
        std::vector<double> accuracy(per_structure);
        parallel_for(per_structure, cfg.workers, [&](std::size_t idx) {
            const std::size_t e = idx / (n_cor * n_seed);
            const std::size_t c = (idx / n_seed) % n_cor;
            const std::size_t s = idx % n_seed;
            Rng rng = make_rng(cfg.master_seed,
                               {kDyadicEpisodeTag, static_cast<std::uint64_t>(structure), e, c, s});
            const BeliefLabels beliefs = sample_beliefs(truth, cfg.error_rates[e], rng);
            const TeacherConfig teacher{teachers[c], cfg.error_rates[e], TeacherKind::self_centered};
            const TeachingSet set = select_self_centered(teacher, beliefs);
            accuracy[idx] = accuracy_1nn(student, set, truth.labels());
        });
        CurveAccumulator single;
        for (std::size_t idx = 0; idx < per_structure; ++idx) {
            const std::size_t e = idx / (n_cor * n_seed);
            const std::size_t c = (idx / n_seed) % n_cor;
            single.add(teacher_alignment[c], cfg.error_rates[e], accuracy[idx]);
            pooled.add(teacher_alignment[c], cfg.error_rates[e], accuracy[idx]);
        }
        CurveProvenance single_prov{CurveKind::dyadic, spec.side(), {structure}, cfg.master_seed};
        out.per_structure.emplace(structure, single.finish(single_prov));
    }
    out.pooled = pooled.finish(prov);
    return out;
}

CurveTable build_classroom_curve(const GridSpec& spec, const SweepConfig& cfg) {
    cfg.validate();
    if (cfg.student_corruptions.empty())
        throw Error(ErrorKind::config, "classroom sweeps need student corruption levels");
    const Representation canonical = Representation::canonical(spec.side());
    const std::size_t n_err = cfg.error_rates.size();
    const std::size_t n_cor = cfg.corruption_levels.size();
    const std::size_t n_stu = cfg.student_corruptions.size();
    const std::size_t n_seed = static_cast<std::size_t>(cfg.seeds_per_point);

    std::vector<Representation> teachers;
    std::vector<std::vector<Representation>> students(n_cor);
    std::vector<std::vector<double>> pair_alignment(n_cor);
    for (std::size_t c = 0; c < n_cor; ++c) {
        Rng trng = make_rng(cfg.master_seed, {kClassTeacherTag, c});
        teachers.push_back(corrupt_representation(canonical, cfg.corruption_levels[c], trng));
        for (std::size_t s = 0; s < n_stu; ++s) {
            Rng srng = make_rng(cfg.master_seed, {kClassStudentTag, c, s});
            students[c].push_back(corrupt_representation(canonical, cfg.student_corruptions[s], srng));
            pair_alignment[c].push_back(alignment(students[c].back(), teachers[c]));
        }
    }

    CurveAccumulator acc;
    for (Labeling structure : cfg.label_structures) {
        const TrueLabels truth = true_labels(GridSpec(spec.side(), structure));
        // One teaching set per (teacher, seed) is shared by the whole class.
        const std::size_t lessons = n_err * n_cor * n_seed;
        std::vector<double> accuracy(lessons * n_stu);
        parallel_for(lessons, cfg.workers, [&](std::size_t idx) {
            const std::size_t e = idx / (n_cor * n_seed);
            const std::size_t c = (idx / n_seed) % n_cor;
            const std::size_t k = idx % n_seed;
            Rng rng = make_rng(cfg.master_seed, {kClassEpisodeTag, static_cast<std::uint64_t>(structure), e, c, k});
            const BeliefLabels beliefs = sample_beliefs(truth, cfg.error_rates[e], rng);
            const TeachingSet set =
                select_self_centered({teachers[c], cfg.error_rates[e], TeacherKind::self_centered}, beliefs);
            for (std::size_t s = 0; s < n_stu; ++s)
                accuracy[idx * n_stu + s] = accuracy_1nn(students[c][s], set, truth.labels());
        });
        for (std::size_t idx = 0; idx < lessons; ++idx) {
            const std::size_t e = idx / (n_cor * n_seed);
            const std::size_t c = (idx / n_seed) % n_cor;
            for (std::size_t s = 0; s < n_stu; ++s)
                acc.add(pair_alignment[c][s], cfg.error_rates[e], accuracy[idx * n_stu + s]);
        }
    }
    return acc.finish({CurveKind::classroom, spec.side(), cfg.label_structures, cfg.master_seed});
}

double structure_rank_correlation(const CurveTable& a, const CurveTable& b) {
    std::vector<double> va, vb;
    for (int e = 0; e < CurveTable::kErrorBuckets; ++e) {
        for (int al = 0; al < CurveTable::kAlignmentBuckets; ++al) {
            if (a.populated(al, e) && b.populated(al, e)) {
                va.push_back(a.cell(al, e).mean);
                vb.push_back(b.cell(al, e).mean);
            }
        }
    }
    if (va.size() < 3) throw Error(ErrorKind::insufficient_data, "fewer than 3 shared populated buckets");
    return stats::spearman(va, vb);
}

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& field) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        throw Error(ErrorKind::validation, "bad number in curve CSV: '" + field + "'");
    }
    if (used != field.size()) throw Error(ErrorKind::validation, "bad number in curve CSV: '" + field + "'");
    return v;
}

constexpr const char* kCurveHeader = "alignment_lo,alignment_hi,error_lo,error_hi,mean_accuracy,count";

}  // namespace

void write_curve_csv(std::ostream& out, const CurveTable& curve) {
    out << kCurveHeader << '\n';
    for (int e = 0; e < CurveTable::kErrorBuckets; ++e) {
        for (int a = 0; a < CurveTable::kAlignmentBuckets; ++a) {
            const auto& c = curve.cell(a, e);
            if (c.count == 0) continue;
            out << format_double(CurveTable::alignment_lo(a)) << ',' << format_double(CurveTable::alignment_hi(a))
                << ',' << format_double(CurveTable::error_lo(e)) << ',' << format_double(CurveTable::error_hi(e))
                << ',' << format_double(c.mean) << ',' << c.count << '\n';
        }
    }
}

CurveTable read_curve_csv(std::istream& in, CurveProvenance provenance) {
    std::string line;
    if (!std::getline(in, line) || line != kCurveHeader)
        throw Error(ErrorKind::validation, "curve CSV header mismatch");
    CurveTable table(std::move(provenance));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 6) throw Error(ErrorKind::validation, "curve CSV row needs 6 fields");
        const double a_lo = parse_double(fields[0]);
        const double e_lo = parse_double(fields[2]);
        const int a = static_cast<int>(std::lround(a_lo * 10.0 + 10.0));
        const int e = static_cast<int>(std::lround(e_lo * 10.0));
        if (a < 0 || a >= CurveTable::kAlignmentBuckets || e < 0 || e >= CurveTable::kErrorBuckets ||
            CurveTable::alignment_lo(a) != a_lo || CurveTable::error_lo(e) != e_lo ||
            CurveTable::alignment_hi(a) != parse_double(fields[1]) || CurveTable::error_hi(e) != parse_double(fields[3]))
            throw Error(ErrorKind::validation, "curve CSV bucket edges do not match the 0.1 grid");
        const double mean = parse_double(fields[4]);
        const long long count = std::stoll(fields[5]);
        if (count <= 0 || !(mean >= 0.0 && mean <= 1.0))
            throw Error(ErrorKind::validation, "curve CSV cell out of range");
        table.set_cell(a, e, {mean, count});
    }
    return table;
}

nlohmann::json provenance_json(const CurveTable& curve) {
    const auto& p = curve.provenance();
    nlohmann::json structures = nlohmann::json::array();
    for (Labeling l : p.label_structures) structures.push_back(std::string(to_string(l)));
    return nlohmann::json{{"format_version", 1},
                          {"kind", std::string(to_string(p.kind))},
                          {"grid_side", p.grid_side},
                          {"label_structures", structures},
                          {"master_seed", p.master_seed},
                          {"bucket_width", 0.1},
                          {"episodes", curve.total_count()}};
}

CurveProvenance provenance_from_json(const nlohmann::json& j) {
    CurveProvenance p;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "dyadic") p.kind = CurveKind::dyadic;
    else if (kind == "classroom") p.kind = CurveKind::classroom;
    else throw Error(ErrorKind::validation, "unknown curve kind '" + kind + "'");
    p.grid_side = j.at("grid_side").get<int>();
    for (const auto& s : j.at("label_structures")) p.label_structures.push_back(parse_labeling(s.get<std::string>()));
    p.master_seed = j.at("master_seed").get<std::uint64_t>();
    return p;
}

}  // namespace alignteach

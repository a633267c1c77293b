#include "alignteach/matching.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>

#include "alignteach/error.hpp"
#include "alignteach/parallel.hpp"
#include "alignteach/stats.hpp"

namespace alignteach {

namespace {

constexpr std::uint64_t kEpisodeTag = 0xE1;
constexpr std::uint64_t kPoolTag = 0xA1;
constexpr std::uint64_t kEvalTag = 0xA2;
constexpr std::uint64_t kRandomTag = 0xA3;
constexpr std::uint64_t kSweepTag = 0xB1;
constexpr std::uint64_t kGreedyTag = 0xB2;

Rng episode_rng(std::uint64_t seed, int teacher_id, int episode) {
    return make_rng(seed, {kEpisodeTag, static_cast<std::uint64_t>(teacher_id), static_cast<std::uint64_t>(episode)});
}

void check_settings(const EvaluationSettings& s) {
    if (s.episode_seeds < 1) throw Error(ErrorKind::precondition, "episode seeds must be >= 1");
    if (s.t_iters < 1) throw Error(ErrorKind::precondition, "inner iterations must be >= 1");
}

// Teaching sets of a self-centered teacher for every episode.
std::vector<TeachingSet> self_centered_lessons(const Teacher& teacher, const TrueLabels& truth,
                                               const EvaluationSettings& settings) {
    std::vector<TeachingSet> sets;
    sets.reserve(static_cast<std::size_t>(settings.episode_seeds));
    for (int e = 0; e < settings.episode_seeds; ++e) {
        Rng rng = episode_rng(settings.seed, teacher.id, e);
        const BeliefLabels beliefs = sample_beliefs(truth, teacher.config.error_rate, rng);
        sets.push_back(select_self_centered(teacher.config, beliefs));
    }
    return sets;
}

double mean_over_lessons(const Representation& student, const std::vector<TeachingSet>& sets,
                         const TrueLabels& truth) {
    double sum = 0.0;
    for (const auto& set : sets) sum += accuracy_1nn(student, set, truth.labels());
    return sum / static_cast<double>(sets.size());
}

// Student-centric teacher with a fixed classroom: per episode, fresh beliefs
// then the inner search over the classroom. Returns per-member means.
std::vector<double> centric_outcomes(int teacher_id, double error_rate, const TrueLabels& truth,
                                     std::span<const Representation> classroom, const EvaluationSettings& settings) {
    std::vector<double> sums(classroom.size(), 0.0);
    for (int e = 0; e < settings.episode_seeds; ++e) {
        Rng rng = episode_rng(settings.seed, teacher_id, e);
        const BeliefLabels beliefs = sample_beliefs(truth, error_rate, rng);
        const CentricSelection sel = select_student_centric(beliefs, classroom, settings.t_iters, rng);
        for (std::size_t i = 0; i < classroom.size(); ++i)
            sums[i] += accuracy_1nn(classroom[i], sel.set, truth.labels());
    }
    for (double& s : sums) s /= static_cast<double>(settings.episode_seeds);
    return sums;
}

int argmax_lowest(const std::vector<double>& scores) {
    int best = 0;
    for (int t = 1; t < static_cast<int>(scores.size()); ++t)
        if (scores[static_cast<std::size_t>(t)] > scores[static_cast<std::size_t>(best)]) best = t;
    return best;
}

void require_teachers(const Pool& pool) {
    if (pool.teachers.empty()) throw Error(ErrorKind::precondition, "pool has no teachers");
}

}  // namespace

std::string_view to_string(Method method) {
    switch (method) {
        case Method::random: return "random";
        case Method::mooc: return "mooc";
        case Method::ours: return "ours";
        case Method::optimal: return "optimal";
    }
    return "unknown";
}

Method parse_method(std::string_view text) {
    for (Method m : all_methods())
        if (to_string(m) == text) return m;
    throw Error(ErrorKind::config, "unknown matching method '" + std::string(text) + "'");
}

std::vector<Method> all_methods() { return {Method::random, Method::mooc, Method::ours, Method::optimal}; }

std::vector<double> realize_outcomes(const Pool& pool, const Assignment& assignment,
                                     const EvaluationSettings& settings) {
    check_settings(settings);
    if (assignment.teacher_of.size() != pool.students.size())
        throw Error(ErrorKind::coverage, "assignment does not cover every pool student");
    const TrueLabels truth = true_labels(pool.spec);
    std::vector<std::vector<int>> classes(pool.teachers.size());
    for (std::size_t s = 0; s < pool.students.size(); ++s) {
        const int t = assignment.teacher_of[s];
        if (t < 0 || t >= static_cast<int>(pool.teachers.size()))
            throw Error(ErrorKind::coverage, "student " + std::to_string(s) + " is unassigned");
        classes[static_cast<std::size_t>(t)].push_back(static_cast<int>(s));
    }
    std::vector<double> out(pool.students.size(), 0.0);
    parallel_for(pool.teachers.size(), settings.workers, [&](std::size_t t) {
        const auto& members = classes[t];
        if (members.empty()) return;
        const Teacher& teacher = pool.teachers[t];
        if (teacher.config.kind == TeacherKind::self_centered) {
            const auto sets = self_centered_lessons(teacher, truth, settings);
            for (int s : members)
                out[static_cast<std::size_t>(s)] =
                    mean_over_lessons(pool.students[static_cast<std::size_t>(s)].representation, sets, truth);
        } else {
            std::vector<Representation> classroom;
            for (int s : members) classroom.push_back(pool.students[static_cast<std::size_t>(s)].representation);
            const auto acc = centric_outcomes(teacher.id, teacher.config.error_rate, truth, classroom, settings);
            for (std::size_t i = 0; i < members.size(); ++i) out[static_cast<std::size_t>(members[i])] = acc[i];
        }
    });
    return out;
}

std::vector<std::vector<double>> dyadic_accuracy_matrix(const Pool& pool, const EvaluationSettings& settings) {
    check_settings(settings);
    require_teachers(pool);
    const TrueLabels truth = true_labels(pool.spec);
    std::vector<std::vector<double>> m(pool.students.size(), std::vector<double>(pool.teachers.size(), 0.0));
    parallel_for(pool.teachers.size(), settings.workers, [&](std::size_t t) {
        const Teacher& teacher = pool.teachers[t];
        if (teacher.config.kind == TeacherKind::self_centered) {
            const auto sets = self_centered_lessons(teacher, truth, settings);
            for (std::size_t s = 0; s < pool.students.size(); ++s)
                m[s][t] = mean_over_lessons(pool.students[s].representation, sets, truth);
        } else {
            for (std::size_t s = 0; s < pool.students.size(); ++s) {
                const Representation& rep = pool.students[s].representation;
                m[s][t] = centric_outcomes(teacher.id, teacher.config.error_rate, truth, {&rep, 1}, settings)[0];
            }
        }
    });
    return m;
}

Assignment match_random(const Pool& pool, Rng& rng) {
    require_teachers(pool);
    Assignment a{Method::random, {}};
    for (std::size_t s = 0; s < pool.students.size(); ++s)
        a.teacher_of.push_back(uniform_index(rng, static_cast<int>(pool.teachers.size())));
    return a;
}

Assignment match_mooc(const Pool& pool) {
    require_teachers(pool);
    int best = 0;
    for (int t = 1; t < static_cast<int>(pool.teachers.size()); ++t)
        if (pool.teachers[static_cast<std::size_t>(t)].config.error_rate <
            pool.teachers[static_cast<std::size_t>(best)].config.error_rate)
            best = t;
    return {Method::mooc, std::vector<int>(pool.students.size(), best)};
}

Assignment match_ours(const Pool& pool, const CurveTable& curve) {
    require_teachers(pool);
    Assignment a{Method::ours, {}};
    std::vector<double> expected(pool.teachers.size());
    for (const auto& student : pool.students) {
        for (std::size_t t = 0; t < pool.teachers.size(); ++t) {
            const auto& cfg = pool.teachers[t].config;
            expected[t] = curve.lookup(alignment(student.representation, cfg.representation), cfg.error_rate);
        }
        a.teacher_of.push_back(argmax_lowest(expected));
    }
    return a;
}

Assignment match_optimal(const Pool& pool, const std::vector<std::vector<double>>& dyadic) {
    require_teachers(pool);
    if (dyadic.size() != pool.students.size()) throw Error(ErrorKind::dimension, "dyadic matrix has wrong row count");
    Assignment a{Method::optimal, {}};
    for (const auto& row : dyadic) {
        if (row.size() != pool.teachers.size()) throw Error(ErrorKind::dimension, "dyadic matrix has wrong width");
        a.teacher_of.push_back(argmax_lowest(row));
    }
    return a;
}

Assignment match_optimal(const Pool& pool, const EvaluationSettings& settings) {
    return match_optimal(pool, dyadic_accuracy_matrix(pool, settings));
}

OutcomeReport report(std::span<const double> accuracies, double pass_threshold) {
    if (accuracies.empty()) throw Error(ErrorKind::precondition, "cannot report on zero students");
    OutcomeReport r;
    r.per_student_accuracies.assign(accuracies.begin(), accuracies.end());
    std::vector<double> sorted = r.per_student_accuracies;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const std::size_t decile = std::max<std::size_t>(1, n / 10);
    // Sum in sorted order so the result is independent of input order.
    r.avg_accuracy = stats::mean(sorted);
    r.bottom_decile_mean = stats::mean(std::span<const double>(sorted.data(), decile));
    r.top_decile_mean = stats::mean(std::span<const double>(sorted.data() + (n - decile), decile));
    const auto passed = std::count_if(sorted.begin(), sorted.end(), [&](double a) { return a >= pass_threshold; });
    r.pass_rate = static_cast<double>(passed) / static_cast<double>(n);
    return r;
}

MatchingResult run_matching_experiment(const MatchingExperiment& exp, const CurveTable* curve) {
    if (exp.pools < 1) throw Error(ErrorKind::config, "need at least one pool");
    if (exp.methods.empty()) throw Error(ErrorKind::config, "no matching methods requested");
    const bool wants_ours = std::find(exp.methods.begin(), exp.methods.end(), Method::ours) != exp.methods.end();
    if (wants_ours && curve == nullptr) throw Error(ErrorKind::precondition, "Ours requires a utility curve");

    MatchingResult result;
    for (Method m : exp.methods) result.summaries.push_back({m, {}, 0, 0, 0, 0, 0, 0, 0, 0});
    for (int p = 0; p < exp.pools; ++p) {
        PoolConfig pc = exp.pool_config;
        pc.master_seed = derive_seed(exp.seed, {kPoolTag, static_cast<std::uint64_t>(p)});
        const Pool pool = generate_pool(pc);
        EvaluationSettings settings;
        settings.episode_seeds = exp.episode_seeds;
        settings.seed = derive_seed(exp.seed, {kEvalTag, static_cast<std::uint64_t>(p)});
        settings.workers = exp.workers;

        // Self-centered lessons do not depend on the classroom, so every
        // method's realized accuracy is a lookup into the dyadic matrix.
        const auto dyadic = dyadic_accuracy_matrix(pool, settings);
        std::vector<Assignment> pool_assignments;
        for (std::size_t mi = 0; mi < exp.methods.size(); ++mi) {
            Assignment a;
            switch (exp.methods[mi]) {
                case Method::random: {
                    Rng rng = make_rng(exp.seed, {kRandomTag, static_cast<std::uint64_t>(p)});
                    a = match_random(pool, rng);
                    break;
                }
                case Method::mooc: a = match_mooc(pool); break;
                case Method::ours: a = match_ours(pool, *curve); break;
                case Method::optimal: a = match_optimal(pool, dyadic); break;
            }
            std::vector<double> acc(pool.students.size());
            for (std::size_t s = 0; s < acc.size(); ++s)
                acc[s] = dyadic[s][static_cast<std::size_t>(a.teacher_of[s])];
            result.summaries[mi].per_pool.push_back(report(acc, exp.pass_threshold));
            pool_assignments.push_back(std::move(a));
        }
        result.assignments.push_back(std::move(pool_assignments));
    }
    for (auto& s : result.summaries) {
        std::vector<double> avg, bot, top, pass;
        for (const auto& r : s.per_pool) {
            avg.push_back(r.avg_accuracy);
            bot.push_back(r.bottom_decile_mean);
            top.push_back(r.top_decile_mean);
            pass.push_back(r.pass_rate);
        }
        s.avg = stats::mean(avg);
        s.bottom10 = stats::mean(bot);
        s.top10 = stats::mean(top);
        s.pass_rate = stats::mean(pass);
        s.stderr_avg = stats::standard_error(avg);
        s.stderr_bottom10 = stats::standard_error(bot);
        s.stderr_top10 = stats::standard_error(top);
        s.stderr_pass_rate = stats::standard_error(pass);
    }
    return result;
}

void write_summary_csv(std::ostream& out, const std::vector<MethodSummary>& summaries) {
    out << "method,avg,bottom10,top10,pass_rate,stderr_avg,stderr_bottom10,stderr_top10,stderr_pass_rate\n";
    char buf[256];
    for (const auto& s : summaries) {
        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      std::string(to_string(s.method)).c_str(), s.avg, s.bottom10, s.top10, s.pass_rate,
                      s.stderr_avg, s.stderr_bottom10, s.stderr_top10, s.stderr_pass_rate);
        out << buf;
    }
}

nlohmann::json assignment_to_json(const Assignment& a) {
    return {{"method", std::string(to_string(a.method))}, {"teacher_of", a.teacher_of}};
}

Assignment assignment_from_json(const nlohmann::json& j) {
    return {parse_method(j.at("method").get<std::string>()), j.at("teacher_of").get<std::vector<int>>()};
}

std::vector<double> realize_centric_classroom(const Pool& pool, std::span<const int> members, double centric_error,
                                              const EvaluationSettings& settings) {
    check_settings(settings);
    if (members.empty()) throw Error(ErrorKind::precondition, "classroom is empty");
    std::vector<Representation> classroom;
    for (int s : members) classroom.push_back(pool.students.at(static_cast<std::size_t>(s)).representation);
    const int centric_id = static_cast<int>(pool.teachers.size());
    return centric_outcomes(centric_id, centric_error, true_labels(pool.spec), classroom, settings);
}

GreedyResult greedy_student_centric(const Pool& pool, std::span<const double> base_accuracies,
                                    double centric_error, const EvaluationSettings& settings) {
    check_settings(settings);
    if (!(centric_error >= 0.0 && centric_error <= 1.0))
        throw Error(ErrorKind::range, "student-centric error rate must lie in [0, 1]");
    if (base_accuracies.size() != pool.students.size())
        throw Error(ErrorKind::precondition, "base outcomes must cover every pool student");

    const TrueLabels truth = true_labels(pool.spec);
    const int centric_id = static_cast<int>(pool.teachers.size());
    const auto episodes = static_cast<std::size_t>(settings.episode_seeds);
    const auto iters = static_cast<std::size_t>(settings.t_iters);

    // The candidate streams do not depend on the classroom, so they are drawn
    // once and each admission only adds the newcomer's believed-correct
    // counts. This matches re-running the inner search from scratch.
    std::vector<BeliefLabels> beliefs;
    std::vector<std::vector<TeachingSet>> candidates(episodes);
    std::vector<std::vector<long long>> correct(episodes, std::vector<long long>(iters, 0));
    for (std::size_t e = 0; e < episodes; ++e) {
        Rng rng = episode_rng(settings.seed, centric_id, static_cast<int>(e));
        beliefs.push_back(sample_beliefs(truth, centric_error, rng));
        const auto members = believed_members(beliefs.back());
        for (std::size_t i = 0; i < iters; ++i) candidates[e].push_back(sample_candidate_set(beliefs.back(), members, rng));
    }

    std::vector<int> order(pool.students.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return base_accuracies[static_cast<std::size_t>(a)] < base_accuracies[static_cast<std::size_t>(b)];
    });

    GreedyResult result;
    std::vector<int> members;
    for (int s : order) {
        const Representation& rep = pool.students[static_cast<std::size_t>(s)].representation;
        members.push_back(s);
        std::vector<std::size_t> chosen(episodes);
        parallel_for(episodes, settings.workers, [&](std::size_t e) {
            for (std::size_t i = 0; i < iters; ++i)
                correct[e][i] += count_correct_1nn(rep, candidates[e][i], beliefs[e].labels);
            chosen[e] = static_cast<std::size_t>(
                std::max_element(correct[e].begin(), correct[e].end()) - correct[e].begin());
        });
        std::vector<double> acc(members.size(), 0.0);
        for (std::size_t m = 0; m < members.size(); ++m) {
            const Representation& mrep = pool.students[static_cast<std::size_t>(members[m])].representation;
            for (std::size_t e = 0; e < episodes; ++e)
                acc[m] += accuracy_1nn(mrep, candidates[e][chosen[e]], truth.labels());
            acc[m] /= static_cast<double>(episodes);
        }
        const double gain = acc.back() - base_accuracies[static_cast<std::size_t>(s)];
        if (!(gain > 0.0)) {
            result.stopping_student = s;
            result.stopping_gain = gain;
            members.pop_back();
            break;
        }
        result.members = members;
        result.accuracies = acc;
    }
    for (std::size_t m = 0; m < result.members.size(); ++m)
        result.gains.push_back(result.accuracies[m] - base_accuracies[static_cast<std::size_t>(result.members[m])]);
    return result;
}

std::vector<GreedyRun> run_greedy_experiment(const Pool& pool, std::span<const double> base_accuracies,
                                             const GreedyExperiment& exp) {
    if (exp.runs < 1) throw Error(ErrorKind::config, "runs must be >= 1");
    const std::size_t n_err = exp.error_rates.size();
    const std::size_t runs = static_cast<std::size_t>(exp.runs);
    std::vector<GreedyRun> out(n_err * runs);
    parallel_for(out.size(), exp.workers, [&](std::size_t idx) {
        const std::size_t e = idx / runs;
        const std::size_t r = idx % runs;
        EvaluationSettings settings{exp.episode_seeds, exp.t_iters, derive_seed(exp.seed, {kGreedyTag, r}), 1};
        out[idx] = {exp.error_rates[e], static_cast<int>(r),
                    greedy_student_centric(pool, base_accuracies, exp.error_rates[e], settings)};
    });
    return out;
}

std::vector<SizeSweepPoint> classroom_size_sweep(const Pool& pool, const SizeSweepConfig& cfg) {
    if (cfg.samples < 1) throw Error(ErrorKind::config, "samples must be >= 1");
    for (int size : cfg.sizes) {
        if (size < 1) throw Error(ErrorKind::precondition, "classroom sizes must be >= 1");
        if (size > static_cast<int>(pool.students.size()))
            throw Error(ErrorKind::precondition, "classroom size " + std::to_string(size) + " exceeds the pool");
    }
    for (double e : cfg.error_rates)
        if (!(e >= 0.0 && e <= 1.0)) throw Error(ErrorKind::range, "error rates must lie in [0, 1]");

    const std::size_t n_err = cfg.error_rates.size();
    const std::size_t n_samp = static_cast<std::size_t>(cfg.samples);
    const std::size_t per_size = n_err * n_samp;
    const std::size_t jobs = cfg.sizes.size() * per_size;
    std::vector<double> classroom_mean(jobs);
    parallel_for(jobs, cfg.workers, [&](std::size_t idx) {
        const std::size_t z = idx / per_size;
        const std::size_t e = (idx / n_samp) % n_err;
        const std::size_t k = idx % n_samp;
        const std::uint64_t job_seed = derive_seed(cfg.seed, {kSweepTag, z, e, k});
        Rng rng(job_seed);
        std::vector<int> ids(pool.students.size());
        std::iota(ids.begin(), ids.end(), 0);
        const auto size = static_cast<std::size_t>(cfg.sizes[z]);
        for (std::size_t i = 0; i < size; ++i) {  // partial Fisher-Yates
            const auto j = i + static_cast<std::size_t>(uniform_index(rng, static_cast<int>(ids.size() - i)));
            std::swap(ids[i], ids[j]);
        }
        ids.resize(size);
        EvaluationSettings settings{cfg.episode_seeds, cfg.t_iters, job_seed, 1};
        const auto acc = realize_centric_classroom(pool, ids, cfg.error_rates[e], settings);
        classroom_mean[idx] = stats::mean(acc);
    });
    std::vector<SizeSweepPoint> out;
    for (std::size_t z = 0; z < cfg.sizes.size(); ++z) {
        std::span<const double> chunk(classroom_mean.data() + z * per_size, per_size);
        out.push_back({cfg.sizes[z], stats::mean(chunk), stats::standard_error(chunk)});
    }
    return out;
}

}  // namespace alignteach

#pragma once

// Utility curves: (alignment bucket, error bucket) -> mean student accuracy.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <vector>

#include "alignteach/grid_env.hpp"

namespace alignteach {

enum class CurveKind { dyadic, classroom };

std::string_view to_string(CurveKind kind);

struct CurveProvenance {
    CurveKind kind = CurveKind::dyadic;
    int grid_side = 6;
    std::vector<Labeling> label_structures;
    std::uint64_t master_seed = 0;

    friend bool operator==(const CurveProvenance&, const CurveProvenance&) = default;
};

class CurveTable {
public:
    static constexpr int kAlignmentBuckets = 20;  // [-1, 1] in steps of 0.1
    static constexpr int kErrorBuckets = 10;      // [0, 1] in steps of 0.1

    struct Cell {
        double mean = 0.0;
        std::int64_t count = 0;
        friend bool operator==(const Cell&, const Cell&) = default;
    };

    explicit CurveTable(CurveProvenance provenance = {});

    // Values at or beyond the top edge land in the last bucket.
    static int alignment_bucket(double alignment);
    static int error_bucket(double error);
    static double alignment_lo(int bucket) { return (bucket - 10) / 10.0; }
    static double alignment_hi(int bucket) { return (bucket - 9) / 10.0; }
    static double error_lo(int bucket) { return bucket / 10.0; }
    static double error_hi(int bucket) { return (bucket + 1) / 10.0; }

    const Cell& cell(int alignment_bucket, int error_bucket) const;
    void set_cell(int alignment_bucket, int error_bucket, Cell cell);
    bool populated(int alignment_bucket, int error_bucket) const { return cell(alignment_bucket, error_bucket).count > 0; }

    std::int64_t total_count() const;
    bool empty() const { return total_count() == 0; }

    // Mean of the addressed bucket, or of the nearest populated bucket in
    // index space (ties: lower error index, then higher alignment index).
    double lookup(double alignment, double error) const;

    const CurveProvenance& provenance() const noexcept { return provenance_; }

    friend bool operator==(const CurveTable&, const CurveTable&) = default;

private:
    CurveProvenance provenance_;
    std::array<Cell, kAlignmentBuckets * kErrorBuckets> cells_{};
};

// Sums episodes into buckets; finish() divides once so the stored means are
// what gets persisted and compared.
class CurveAccumulator {
public:
    void add(double alignment, double error, double accuracy);
    CurveTable finish(CurveProvenance provenance) const;

private:
    std::array<double, CurveTable::kAlignmentBuckets * CurveTable::kErrorBuckets> sums_{};
    std::array<std::int64_t, CurveTable::kAlignmentBuckets * CurveTable::kErrorBuckets> counts_{};
};

struct SweepConfig {
    std::vector<double> error_rates;
    std::vector<double> corruption_levels;
    int seeds_per_point = 10;
    std::vector<Labeling> label_structures;
    std::vector<double> student_corruptions;  // classroom sweeps only
    std::uint64_t master_seed = 0;
    int workers = 1;

    // 0.0..0.9 error x 0.00..1.00 corruption, columns + quadrants.
    static SweepConfig dyadic_defaults();
    // 0.0..0.9 error x 0.0..1.0 teacher corruption x 0.0..0.9 students, columns.
    static SweepConfig classroom_defaults();

    void validate() const;
    std::int64_t episode_count() const;
};

// Evenly spaced values lo, lo+step, ..., hi computed as lo + i*step with a
// rounded count, so 0.3 is (3 * 0.1) rather than an accumulated sum.
std::vector<double> linear_steps(double lo, double hi, double step);

struct DyadicCurves {
    CurveTable pooled;
    std::map<Labeling, CurveTable> per_structure;
};

DyadicCurves build_dyadic_curve(const GridSpec& spec, const SweepConfig& cfg);
CurveTable build_classroom_curve(const GridSpec& spec, const SweepConfig& cfg);

double structure_rank_correlation(const CurveTable& a, const CurveTable& b);

void write_curve_csv(std::ostream& out, const CurveTable& curve);
CurveTable read_curve_csv(std::istream& in, CurveProvenance provenance = {});

nlohmann::json provenance_json(const CurveTable& curve);
CurveProvenance provenance_from_json(const nlohmann::json& j);

}  // namespace alignteach

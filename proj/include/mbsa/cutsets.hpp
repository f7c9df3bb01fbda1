#pragma once

#include "mbsa/expr.hpp"
#include "mbsa/model.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace mbsa::cutsets
{

/// Cut sets are fault masks over the model's fault atoms (bit i = i-th fault).
using CutSet = FaultMask;

/// Snapshot after completing cardinality layer `completed_cardinality`.
///
/// Every MCS of cardinality <= completed_cardinality is in `lower_bound`, and
/// nothing else is. When `exhausted`, the lower bound is the exact MCS set.
struct CutSetReport
{
    std::size_t completed_cardinality = 0;
    std::vector< CutSet > lower_bound;  // sorted by (cardinality, mask)
    bool exhausted = false;
    std::size_t reachability_checks = 0;  // cumulative
    std::size_t pruned_supersets = 0;     // cumulative
};

/// True iff a `tle` state is reachable when every fault outside `faults` is
/// pinned false (transitions that would activate such a fault are removed).
bool is_cut_set( const SystemModel& m, const Expr& tle, CutSet faults );

/// Layered enumeration, k = 0 .. |F|. Candidates of a layer are checked in
/// parallel (OpenMP); `on_layer`, when set, sees each report as it completes.
std::vector< CutSetReport > enumerate_mcs( const SystemModel& m, const Expr& tle,
                                           const std::function< void( const CutSetReport& ) >& on_layer = {} );

/// Same contract as `enumerate_mcs`, strictly sequential. Kept as the
/// reference the parallel kernel is tested and benchmarked against.
std::vector< CutSetReport > enumerate_mcs_serial( const SystemModel& m, const Expr& tle );

/// Sort key used for every externally visible MCS list.
bool cardinality_order( CutSet a, CutSet b );

/// Two-level tree: OR over AND gates, one gate per MCS.
struct FaultTree
{
    std::string top;
    std::vector< std::vector< std::string > > gates;  // each sorted; gates sorted lexicographically

    /// TLE reachable without faults: the tree is the constant-true gate.
    [[nodiscard]] bool always() const { return gates.size() == 1 && gates.front().empty(); }
    /// TLE unreachable with all faults.
    [[nodiscard]] bool unreachable() const { return gates.empty(); }

    friend bool operator==( const FaultTree&, const FaultTree& ) = default;
};

class CutSetError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Throws CutSetError when `mcs` is not an antichain under inclusion.
FaultTree build_fault_tree( const std::vector< std::vector< std::string > >& mcs, const std::string& name );

std::string export_fault_tree_dot( const FaultTree& ft );
nlohmann::json fault_tree_to_json( const FaultTree& ft );
FaultTree fault_tree_from_json( const nlohmann::json& j );

using BasicEventProbabilities = std::map< std::string, double >;

/// Exact P(some MCS fully occurred) by summing over all subsets of the
/// faults that occur in `mcs`, assuming independent basic events.
double probability_by_subsets( const std::vector< std::vector< std::string > >& mcs, const BasicEventProbabilities& p );

/// Same quantity by inclusion-exclusion over the MCS family.
double probability_by_inclusion_exclusion( const std::vector< std::vector< std::string > >& mcs,
                                           const BasicEventProbabilities& p );

struct ProbabilityResult
{
    double value = 0.0;
    std::string method;  // "subsets", "inclusion-exclusion" or "both"
    double cross_check_delta = 0.0;
};

/// Picks the feasible exact routes (both when possible) and reports them.
/// Throws CutSetError for a missing probability or a value outside [0, 1].
ProbabilityResult evaluate_probability( const std::vector< std::vector< std::string > >& mcs,
                                        const BasicEventProbabilities& p );

struct MonteCarloEstimate
{
    double mean = 0.0;
    double stddev = 0.0;  // standard error of the mean
    std::uint64_t samples = 0;
};

/// Sampling estimate; chunks are seeded by index so the result does not
/// depend on the number of threads.
MonteCarloEstimate estimate_probability_monte_carlo( const std::vector< std::vector< std::string > >& mcs,
                                                     const BasicEventProbabilities& p, std::uint64_t samples,
                                                     std::uint64_t seed );
MonteCarloEstimate estimate_probability_monte_carlo_serial( const std::vector< std::vector< std::string > >& mcs,
                                                            const BasicEventProbabilities& p, std::uint64_t samples,
                                                            std::uint64_t seed );

/// MCS list (sorted by cardinality, then lexicographically) as JSON arrays.
nlohmann::json mcs_to_json( const SystemModel& m, const std::vector< CutSet >& mcs );

} // namespace mbsa::cutsets

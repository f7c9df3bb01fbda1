#pragma once

#include "mbsa/fdi_spec.hpp"
#include "mbsa/model.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace mbsa::diag
{

class DiagnosabilityError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Witness of non-diagnosability.
///
/// `witness` has the condition at `t`. Each confuser shares the witness's
/// observations over its own length and refutes certainty at its last step:
/// one confuser for exact and finite delays, one per step of [t, t+n] for
/// bounded delays. Finite-delay pairs are lassos: the last step of both
/// traces continues to `loop_start`.
struct CriticalPair
{
    Trace witness;
    std::vector< Trace > confusers;
    std::size_t t = 0;
    std::optional< std::size_t > loop_start;
};

struct DiagnosabilityResult
{
    bool diagnosable = true;
    std::optional< CriticalPair > pair;
    std::size_t explored = 0;  // product nodes visited
};

/// System-level diagnosability of a Global spec; throws DiagnosabilityError
/// for Trace specs. Among shortest critical pairs the lexicographically least
/// (by the per-step state sequence) is returned.
DiagnosabilityResult check_diagnosability( const SystemModel& m, const fdi::AlarmSpec& spec );

/// Sequential reference with the same contract and the same witness.
DiagnosabilityResult check_diagnosability_serial( const SystemModel& m, const fdi::AlarmSpec& spec );

struct TraceDiagnosis
{
    bool diagnosable = false;
    std::optional< std::size_t > certain_at;  // step where certainty was reached
    std::vector< Trace > confusers;           // when not diagnosable
};

/// Certainty of the alarm condition along `tr` for the occurrence at `t`:
///   exact(n)   K Y^n beta at t+n
///   bounded(n) K O^{<=n} beta at some step of [t, t+n]
///   finite     K O beta at some step >= t within tr
/// Throws DiagnosabilityError when tr is not a trace of m, beta is false at t,
/// or tr ends before the exact/bounded window is decided.
TraceDiagnosis check_trace_diagnosability( const SystemModel& m, const fdi::AlarmSpec& spec, const Trace& tr,
                                           std::size_t t );

/// Replay check: traces belong to m, observations agree, and the pair
/// refutes certainty as documented on CriticalPair.
bool is_valid_critical_pair( const SystemModel& m, const fdi::AlarmSpec& spec, const CriticalPair& pair );

nlohmann::json to_json( const SystemModel& m, const fdi::AlarmSpec& spec, const DiagnosabilityResult& r );
nlohmann::json to_json( const SystemModel& m, const TraceDiagnosis& r );

} // namespace mbsa::diag

#pragma once

// Corpus access, random models and brute-force oracles shared by the unit
// tests and the acceptance runner. The oracles deliberately avoid the
// library's search code: they walk adjacency lists and enumerate paths.

#include "mbsa/diagnosability.hpp"
#include "mbsa/fdi_spec.hpp"
#include "mbsa/model.hpp"
#include "mbsa/tfpg.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mbsa::testing
{

std::filesystem::path corpus_dir();
std::filesystem::path corpus_file( const std::string& relative );

/// Names of the corpus models (file stems under the corpus root).
const std::vector< std::string >& corpus_model_names();
SystemModel corpus_model( const std::string& name );

/// Alarm specs bundled for a corpus model, if any.
std::vector< fdi::AlarmSpec > corpus_specs( const SystemModel& m, const std::string& name );

/// Top level events worth analyzing on a corpus model.
std::vector< std::string > corpus_tles( const std::string& name );

struct RandomModelOptions
{
    unsigned faults = 4;
    unsigned observables = 2;
    unsigned states = 20;
    unsigned max_out_degree = 3;
};

/// Valid model with persistent faults `f0..`, observables `o0..` and a
/// hazard atom `h`. Initial states carry no faults.
SystemModel random_model( std::uint64_t seed, const RandomModelOptions& opt );

// ---------------------------------------------------------------------------
// Model oracles

/// Every path of exactly `length` states from an initial state, by plain DFS.
void all_paths( const SystemModel& m, std::size_t length, const std::function< void( const std::vector< StateId >& ) >& visit );

/// Number of such paths from powers of the adjacency matrix.
std::uint64_t path_count_by_matrix( const SystemModel& m, std::size_t length );

// ---------------------------------------------------------------------------
// Cut-set oracles

/// Reachability of `tle` when only the faults in `allowed` may ever hold.
bool reaches_with( const SystemModel& m, const Expr& tle, FaultMask allowed );

/// All minimal cut sets by scanning every fault subset, sorted by (size, mask).
std::vector< FaultMask > brute_force_mcs( const SystemModel& m, const Expr& tle );

/// P(some set fully occurred) by summing over all outcomes of the involved events.
double brute_force_probability( const std::vector< std::vector< std::string > >& sets,
                                const std::map< std::string, double >& p );

// ---------------------------------------------------------------------------
// Past formulas and knowledge

/// Direct reading of Y^n / O^{<=n} / O over a per-step beta vector.
bool naive_past( fdi::DelayKind kind, unsigned n, const std::vector< bool >& beta, std::size_t t );

std::vector< bool > beta_along( const SystemModel& m, const Expr& beta, const std::vector< StateId >& path );

/// Every path of `t+1` states whose observations agree with `path` on 0..t.
std::vector< std::vector< StateId > > observation_class( const SystemModel& m, const std::vector< StateId >& path,
                                                         std::size_t t );

/// K phi at step t: phi holds at t on every member of the observation class.
bool naive_knows( const SystemModel& m, const std::vector< StateId >& path, std::size_t t, fdi::DelayKind kind,
                  unsigned n, const Expr& beta );

// ---------------------------------------------------------------------------
// Diagnosability oracle

struct DiagnosabilityOracle
{
    bool diagnosable = true;
    std::optional< std::size_t > witness_length;  // shortest violating witness found
};

/// Bounded search for a certainty violation among all paths of up to
/// `horizon` states. Exact and bounded delays are decided on the window
/// after the occurrence; finite delays require the occurrence by step
/// `horizon / 2` and certainty never reached before the horizon.
DiagnosabilityOracle brute_force_diagnosability( const SystemModel& m, const fdi::AlarmSpec& spec, std::size_t horizon );

/// Replays a critical pair by walking successor lists: both traces are
/// paths, observations agree, the witness has the condition at `t` and each
/// confuser refutes certainty as the delay kind requires.
bool replay_critical_pair( const SystemModel& m, const fdi::AlarmSpec& spec, const diag::CriticalPair& pair );

/// Trace-level certainty for the occurrence at t, read off observation classes.
bool naive_trace_diagnosable( const SystemModel& m, const fdi::AlarmSpec& spec, const std::vector< StateId >& path,
                              std::size_t t );

// ---------------------------------------------------------------------------
// TFPG oracles

/// Semantics clauses evaluated literally, one edge clock at a time.
bool naive_consistent( const tfpg::Tfpg& g, const tfpg::ActivationTrace& at );

/// Every activation-time vector and mode timeline at this horizon.
void all_activation_traces( const tfpg::Tfpg& g, unsigned horizon,
                            const std::function< void( const tfpg::ActivationTrace& ) >& visit );

tfpg::ActivationTrace naive_induced_trace( const SystemModel& m, const tfpg::Tfpg& g, const tfpg::NodeMap& nm,
                                           const std::vector< StateId >& path );

/// Completeness by scanning every path of `horizon` states.
bool naive_complete( const SystemModel& m, const tfpg::Tfpg& g, const tfpg::NodeMap& nm, unsigned horizon );

/// Corpus TFPG files (relative to the corpus root) with the horizon used for
/// exhaustive semantic checks.
const std::vector< std::pair< std::string, unsigned > >& corpus_tfpgs();

struct SynthesisCase
{
    std::string model;
    std::string request;
};

const std::vector< SynthesisCase >& corpus_synthesis_cases();

} // namespace mbsa::testing

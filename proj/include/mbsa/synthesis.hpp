#pragma once

#include "mbsa/belief.hpp"
#include "mbsa/fdi_spec.hpp"
#include "mbsa/model.hpp"

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mbsa::synth
{

class SynthesisError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Deterministic automaton over observations whose nodes carry raised alarms.
///
/// Observations are bitmasks over `observables` in the order listed here,
/// which for synthesized diagnosers is the model's declaration order.
struct Diagnoser
{
    std::vector< std::string > observables;
    std::vector< std::string > alarms;
    std::vector< std::string > node_names;
    std::vector< std::vector< bool > > raised;  // [node][alarm]
    std::map< Observation, std::size_t > entry;
    std::vector< std::map< Observation, std::size_t > > delta;
    std::vector< belief::Belief > beliefs;  // synthesized diagnosers only

    [[nodiscard]] std::size_t node_count() const { return node_names.size(); }
    [[nodiscard]] std::size_t alarm_index( std::string_view alarm ) const;
    [[nodiscard]] std::vector< std::string > annotation( std::size_t node ) const;
};

/// Belief-state subset construction; frontier layers are expanded in
/// parallel, node ids follow breadth-first discovery order.
Diagnoser synthesize_diagnoser( const SystemModel& m, std::span< const fdi::AlarmSpec > specs );
Diagnoser synthesize_diagnoser_serial( const SystemModel& m, std::span< const fdi::AlarmSpec > specs );

/// Alarm sets along the unique path for `obs`. Throws SynthesisError
/// ("impossible observation at step k") when the path is undefined.
std::vector< std::vector< std::string > > run_diagnoser( const Diagnoser& d, std::span< const Observation > obs );

/// Model observation re-encoded over the diagnoser's observable order.
/// Throws SynthesisError when the observable sets differ.
Observation to_diagnoser_observation( const SystemModel& m, const Diagnoser& d, Observation o );

struct ConjunctVerdict
{
    fdi::Role role = fdi::Role::correctness;
    std::string formula;
    bool holds = true;
    std::optional< Trace > counterexample;
    std::optional< std::size_t > loop_start;  // lasso counterexamples
};

struct Verdict
{
    std::string alarm;
    std::vector< ConjunctVerdict > conjuncts;  // in pattern order
    std::size_t product_nodes = 0;

    [[nodiscard]] bool holds() const;
    [[nodiscard]] const ConjunctVerdict& conjunct( fdi::Role role ) const;
};

/// Checks every conjunct of the alarm's pattern on the product of m, d and
/// a belief tracker for the knowledge operator. Throws SynthesisError for
/// an alphabet mismatch, an unknown alarm, or a candidate that has no
/// transition for a reachable observation.
Verdict verify_diagnoser( const SystemModel& m, const Diagnoser& d, const fdi::AlarmSpec& spec );

nlohmann::json diagnoser_to_json( const Diagnoser& d );
/// Rejects nondeterministic candidates and unknown nodes or atoms.
Diagnoser diagnoser_from_json( const nlohmann::json& j );
Diagnoser load_diagnoser( const std::filesystem::path& path );
std::string export_diagnoser_dot( const Diagnoser& d );

/// Observation map that assigns every one of the diagnoser's observables.
Observation observation_from_json( const Diagnoser& d, const nlohmann::json& j );
nlohmann::json observation_to_json( const Diagnoser& d, Observation o );

nlohmann::json to_json( const SystemModel& m, const Verdict& v );

} // namespace mbsa::synth

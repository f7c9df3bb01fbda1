#pragma once

#include "mbsa/expr.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mbsa
{

using StateId = std::uint32_t;

/// Bit i set iff the i-th observable atom (declaration order) is true.
using Observation = std::uint64_t;

/// Bit i set iff the i-th fault atom (declaration order) is true.
using FaultMask = std::uint64_t;

/// Semantic errors: unknown states/atoms, malformed traces, size limits.
class ModelError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Syntax errors in structured-text inputs; carries a 1-based line/column.
class ParseError : public ModelError
{
    std::size_t _line;
    std::size_t _column;

public:
    ParseError( const std::string& what, std::size_t line, std::size_t column );
    [[nodiscard]] std::size_t line() const { return _line; }
    [[nodiscard]] std::size_t column() const { return _column; }
};

/// A finite path through a model, one state per time step.
struct Trace
{
    std::vector< StateId > steps;

    [[nodiscard]] std::size_t size() const { return steps.size(); }
    friend bool operator==( const Trace&, const Trace& ) = default;
    friend auto operator<=>( const Trace&, const Trace& ) = default;
};

/// Explicit finite transition system over named boolean atoms.
///
/// Fault, observable and mode atoms are subsets of `atoms`. The model is
/// immutable once constructed; invariants (deadlock freedom, fault
/// persistence, ...) are checked separately by `validate_model` so that
/// violations can be reported instead of rejected.
class SystemModel
{
public:
    struct Parts
    {
        std::vector< std::string > atoms;
        std::vector< std::string > faults;
        std::vector< std::string > observables;
        std::vector< std::string > modes;
        std::vector< std::string > state_names;
        std::vector< std::vector< bool > > valuations;  // indexed like state_names, sized like atoms
        std::vector< std::string > initial;
        std::vector< std::pair< std::string, std::string > > transitions;
    };

    explicit SystemModel( Parts parts );

    [[nodiscard]] std::size_t state_count() const { return _state_names.size(); }
    [[nodiscard]] const std::string& state_name( StateId s ) const { return _state_names.at( s ); }
    [[nodiscard]] StateId state_index( std::string_view name ) const;

    [[nodiscard]] const std::vector< std::string >& atom_names() const { return _atoms; }
    [[nodiscard]] std::size_t atom_index( std::string_view name ) const;
    [[nodiscard]] std::span< const std::size_t > fault_atoms() const { return _faults; }
    [[nodiscard]] std::span< const std::size_t > observable_atoms() const { return _observables; }
    [[nodiscard]] std::span< const std::size_t > mode_atoms() const { return _modes; }

    [[nodiscard]] const std::vector< bool >& valuation( StateId s ) const { return _valuations.at( s ); }
    [[nodiscard]] bool holds( StateId s, std::size_t atom ) const { return _valuations[ s ][ atom ]; }
    [[nodiscard]] Observation observation( StateId s ) const { return _observation[ s ]; }
    [[nodiscard]] FaultMask fault_mask( StateId s ) const { return _fault_mask[ s ]; }

    [[nodiscard]] std::span< const StateId > initial_states() const { return _initial; }
    [[nodiscard]] std::span< const StateId > successors( StateId s ) const;
    [[nodiscard]] std::span< const std::pair< StateId, StateId > > transitions() const { return _transitions; }

    /// Parses a boolean expression over this model's atom names.
    [[nodiscard]] Expr parse_expr( std::string_view text ) const { return Expr::parse( text, _atoms ); }

    /// Fault-atom names selected by `mask`, in declaration order.
    [[nodiscard]] std::vector< std::string > fault_names( FaultMask mask ) const;
    [[nodiscard]] FaultMask fault_mask_of( std::span< const std::string > names ) const;

    /// Observation rendered as an atom-name -> value map (sorted by name).
    [[nodiscard]] nlohmann::json observation_json( Observation o ) const;
    [[nodiscard]] Observation observation_from_json( const nlohmann::json& j ) const;

    [[nodiscard]] nlohmann::json to_json() const;

private:
    std::vector< std::string > _atoms;
    std::vector< std::size_t > _faults;
    std::vector< std::size_t > _observables;
    std::vector< std::size_t > _modes;
    std::vector< std::string > _state_names;
    std::vector< std::vector< bool > > _valuations;
    std::vector< StateId > _initial;
    std::vector< std::pair< StateId, StateId > > _transitions;  // sorted, unique

    std::vector< std::size_t > _succ_offset;  // CSR over _transitions
    std::vector< StateId > _succ;
    std::vector< Observation > _observation;
    std::vector< FaultMask > _fault_mask;
};

SystemModel parse_model( std::string_view text );
SystemModel load_model( const std::filesystem::path& path );

/// Reads a whole file; throws ModelError when it cannot be opened.
std::string read_text_file( const std::filesystem::path& path );

/// nlohmann parse with duplicate-key rejection and line/column error positions.
nlohmann::json parse_json_strict( std::string_view text );

struct Violation
{
    enum class Kind { no_initial_state, deadlock, fault_persistence, initial_fault, mode_exclusivity };

    Kind kind;
    std::string message;
    std::optional< StateId > state;
    std::optional< std::pair< StateId, StateId > > transition;
};

using ValidationReport = std::vector< Violation >;

std::string to_string( Violation::Kind kind );

/// Every violated model invariant, one entry per offending state/transition.
ValidationReport validate_model( const SystemModel& m );

/// Successor names of the named state; throws ModelError("unknown state ...").
std::vector< std::string > successors( const SystemModel& m, std::string_view state );

/// Visits every path of exactly `horizon` states from an initial state, in
/// lexicographic order of state indices. Throws for horizon 0.
void for_each_trace( const SystemModel& m, std::size_t horizon,
                     const std::function< void( std::span< const StateId > ) >& visit );

std::vector< Trace > enumerate_traces( const SystemModel& m, std::size_t horizon );

[[nodiscard]] bool is_trace_of( const SystemModel& m, const Trace& tr );
std::vector< Observation > observation_sequence( const SystemModel& m, const Trace& tr );

Trace trace_from_names( const SystemModel& m, std::span< const std::string > names );
std::vector< std::string > trace_names( const SystemModel& m, const Trace& tr );

} // namespace mbsa

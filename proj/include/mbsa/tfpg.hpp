#pragma once

#include "mbsa/expr.hpp"
#include "mbsa/model.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mbsa::tfpg
{

class TfpgError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

enum class NodeKind { failure_mode, or_node, and_node };

std::string to_string( NodeKind k );  // "FM", "OR", "AND"

/// Upper delay bound meaning "unbounded".
inline constexpr unsigned infinity = std::numeric_limits< unsigned >::max();

struct Edge
{
    std::string from;
    std::string to;
    unsigned tmin = 0;
    unsigned tmax = infinity;
    std::vector< std::string > modes;  // sorted

    friend bool operator==( const Edge&, const Edge& ) = default;
    friend auto operator<=>( const Edge&, const Edge& ) = default;
};

std::string to_string( const Edge& e );  // "u -> v [1,inf] {m1,m2}"

/// Timed failure propagation graph. `map` optionally embeds the node map
/// the graph was synthesized with, in the node-map file format.
struct Tfpg
{
    std::vector< std::string > modes;
    std::map< std::string, NodeKind > nodes;
    std::vector< Edge > edges;  // sorted
    std::optional< nlohmann::json > map;

    friend bool operator==( const Tfpg&, const Tfpg& ) = default;
};

/// Sorts edges and edge mode labels.
void normalize( Tfpg& g );

Tfpg tfpg_from_json( const nlohmann::json& j );
Tfpg load_tfpg( const std::filesystem::path& path );
nlohmann::json tfpg_to_json( const Tfpg& g );
std::string export_tfpg_dot( const Tfpg& g );

// ---------------------------------------------------------------------------
// Structure

struct Finding
{
    enum class Kind { consistency, necessity, possibility, cycle };
    Kind kind;
    std::string subject;  // node or edge
    std::string message;

    /// Cycles are reported as warnings, everything else as errors.
    [[nodiscard]] bool is_error() const { return kind != Kind::cycle; }
};

std::string to_string( Finding::Kind k );

std::vector< Finding > validate_structure( const Tfpg& g );

// ---------------------------------------------------------------------------
// Activation semantics

/// Modes at steps 0..horizon and the activation step of every node.
struct ActivationTrace
{
    unsigned horizon = 0;
    std::vector< std::string > modes;
    std::map< std::string, std::optional< unsigned > > activations;

    friend bool operator==( const ActivationTrace&, const ActivationTrace& ) = default;
    friend auto operator<=>( const ActivationTrace&, const ActivationTrace& ) = default;
};

ActivationTrace activation_trace_from_json( const nlohmann::json& j );
nlohmann::json to_json( const ActivationTrace& at );

struct TraceViolation
{
    std::string node;
    std::string kind;  // "activation" or "inevitability"
    std::string message;
};

/// Violations of the propagation semantics; empty iff consistent.
///
/// An edge's clock runs while its source is active and the mode is in its
/// label; leaving the label stops it and re-entering restarts it from zero.
/// The edge is satisfied while the clock lies in [tmin, tmax] and due when
/// it reaches tmax. An OR node activates only with a satisfied incoming edge,
/// an AND node only with every source active and every edge satisfied. A
/// node must have activated by the step an edge becomes due (OR), or by the
/// step by which every incoming edge has been due (AND). Throws TfpgError
/// for a malformed trace.
std::vector< TraceViolation > check_trace_consistency( const Tfpg& g, const ActivationTrace& at );

/// Fixed failure-mode activations (nullopt = never) for enumeration.
using FmInputs = std::map< std::string, std::optional< unsigned > >;

/// Every consistent activation trace of the given horizon, generated by
/// stepping the edge clocks forward. Throws TfpgError beyond 8 nodes or
/// horizon 12.
void for_each_consistent_trace( const Tfpg& g, unsigned horizon, const std::optional< FmInputs >& fm_inputs,
                                const std::function< void( const ActivationTrace& ) >& visit );
std::vector< ActivationTrace > enumerate_consistent_traces( const Tfpg& g, unsigned horizon,
                                                            const std::optional< FmInputs >& fm_inputs = std::nullopt );

// ---------------------------------------------------------------------------
// Relation to a system model

/// TFPG nodes and modes as predicates over model states. A node given as
/// `all_of` activates when the last of its members has activated.
struct NodeMap
{
    struct Predicate
    {
        std::string text;
        Expr expr;
        std::vector< std::string > all_of;
    };
    std::map< std::string, Predicate > nodes;
    std::vector< std::pair< std::string, Expr > > modes;  // in graph mode order
    std::vector< std::string > mode_texts;

    [[nodiscard]] nlohmann::json to_json() const;
};

/// Throws TfpgError for unmapped nodes or modes, failure modes that are not
/// fault atoms, and mode maps that are not a bijection onto the model's mode atoms.
NodeMap parse_node_map( const SystemModel& m, const Tfpg& g, const nlohmann::json& j );

/// Activation trace induced by a system trace (horizon = |tr| - 1).
ActivationTrace induced_activation_trace( const SystemModel& m, const Tfpg& g, const NodeMap& nm, const Trace& tr );

struct BehavioralResult
{
    bool complete = true;
    std::optional< Trace > witness;  // lexicographically least violating trace
    std::vector< TraceViolation > violations;
    std::uint64_t traces = 0;  // traces scanned, when complete
};

/// Checks the induced activation trace of every system trace with
/// `horizon` states. The scan is split over trace prefixes in parallel.
BehavioralResult behavioral_validate( const Tfpg& g, const SystemModel& m, const NodeMap& nm, unsigned horizon );
BehavioralResult behavioral_validate_serial( const Tfpg& g, const SystemModel& m, const NodeMap& nm,
                                             unsigned horizon );

struct TightenResult
{
    Tfpg graph;
    std::vector< std::string > never_exercised;  // edge descriptions
};

/// Narrows each edge to the delays observed on system traces of `horizon`
/// states. The result is re-validated; a failure there throws std::logic_error.
TightenResult tighten_edges( const Tfpg& g, const SystemModel& m, const NodeMap& nm, unsigned horizon );

// ---------------------------------------------------------------------------
// Synthesis

struct DiscrepancyRequest
{
    std::string name;
    std::string pred;
    NodeKind intent = NodeKind::or_node;
};

struct SynthesisRequest
{
    std::vector< std::string > failure_modes;
    std::vector< DiscrepancyRequest > discrepancies;
    std::vector< std::pair< std::string, std::string > > modes;  // mode name -> predicate
};

SynthesisRequest synthesis_request_from_json( const SystemModel& m, const nlohmann::json& j );

struct SynthesisResult
{
    Tfpg graph;  // node map embedded
    std::vector< std::string > findings;
};

SynthesisResult synthesize_tfpg( const SystemModel& m, const SynthesisRequest& request, unsigned horizon );

} // namespace mbsa::tfpg

#pragma once

#include "mbsa/fdi_spec.hpp"
#include "mbsa/model.hpp"

#include <compare>
#include <cstdint>
#include <span>
#include <vector>

namespace mbsa::belief
{

/// A system state together with the bounded memory of every tracked formula.
struct Member
{
    StateId state = 0;
    std::vector< fdi::Memory > memory;

    friend bool operator==( const Member&, const Member& ) = default;
    friend auto operator<=>( const Member&, const Member& ) = default;
};

/// Sorted, duplicate-free set of members sharing one observation history.
using Belief = std::vector< Member >;

struct BeliefHash
{
    std::size_t operator()( const Belief& b ) const;
};

/// Formulas tracked in every member, in a fixed order.
class Tracker
{
    const SystemModel* _model;
    std::vector< fdi::PastFormula > _formulas;

public:
    Tracker( const SystemModel& m, std::vector< fdi::PastFormula > formulas );

    [[nodiscard]] const SystemModel& model() const { return *_model; }
    [[nodiscard]] std::span< const fdi::PastFormula > formulas() const { return _formulas; }

    /// Memory vector after observing state s with the given predecessor memory.
    [[nodiscard]] std::vector< fdi::Memory > step( StateId s, std::span< const fdi::Memory > prev ) const;
    [[nodiscard]] std::vector< fdi::Memory > start( StateId s ) const;

    /// Initial states producing observation o (may be empty).
    [[nodiscard]] Belief initial( Observation o ) const;
    /// Successor members whose state produces observation o (may be empty).
    [[nodiscard]] Belief advance( const Belief& b, Observation o ) const;
    /// Observations producible by some successor of b, sorted.
    [[nodiscard]] std::vector< Observation > next_observations( const Belief& b ) const;
    /// Observations of initial states, sorted.
    [[nodiscard]] std::vector< Observation > initial_observations() const;

    /// Formula i holds in every member.
    [[nodiscard]] bool certain( const Belief& b, std::size_t formula ) const;
};

/// Observation-class layers along one observation sequence with back
/// pointers, so that a concrete trace can be recovered for any member.
class ObservationLayers
{
public:
    ObservationLayers( const Tracker& tracker, std::span< const Observation > observations );

    [[nodiscard]] std::size_t size() const { return _layers.size(); }
    [[nodiscard]] const Belief& layer( std::size_t t ) const { return _layers.at( t ); }

    /// A trace (length t+1) realizing member `index` of layer t.
    [[nodiscard]] Trace reconstruct( std::size_t t, std::size_t index ) const;

    /// First member of layer t violating formula i, if any.
    [[nodiscard]] std::optional< std::size_t > first_violating( std::size_t t, std::size_t formula ) const;

private:
    const Tracker* _tracker;
    std::vector< Belief > _layers;
    std::vector< std::vector< std::size_t > > _parent;  // index into previous layer
};

} // namespace mbsa::belief

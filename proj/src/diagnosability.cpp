#include "mbsa/diagnosability.hpp"

#include "mbsa/belief.hpp"
#include "search_detail.hpp"

#include <algorithm>
#include <map>

namespace mbsa::diag
{

using fdi::DelayKind;
using fdi::Memory;
using fdi::PastFormula;

namespace
{

// Two observation-synchronized runs with the formula memory of each side.
struct TwinNode
{
    StateId s1 = 0;
    StateId s2 = 0;
    Memory m1 = 0;
    Memory m2 = 0;

    friend bool operator==( const TwinNode&, const TwinNode& ) = default;
    friend auto operator<=>( const TwinNode&, const TwinNode& ) = default;
};

struct TwinHash
{
    std::size_t operator()( const TwinNode& n ) const
    {
        std::size_t h = 0;
        detail::hash_combine( h, n.s1 );
        detail::hash_combine( h, n.s2 );
        detail::hash_combine( h, n.m1 );
        detail::hash_combine( h, n.m2 );
        return h;
    }
};

class TwinPlant
{
    const SystemModel& _m;
    PastFormula _phi;

public:
    TwinPlant( const SystemModel& m, PastFormula phi ) : _m{ m }, _phi{ std::move( phi ) } {}

    Memory step( StateId s, Memory prev ) const
    {
        return fdi::memory_step( _phi, prev, _phi.beta.evaluate( _m.valuation( s ) ) );
    }

    std::vector< TwinNode > roots() const
    {
        std::vector< TwinNode > out;
        const auto init = _m.initial_states();
        const auto before = fdi::memory_before_start( _phi );
        for ( auto a : init )
            for ( auto b : init )
                if ( _m.observation( a ) == _m.observation( b ) )
                    out.push_back( { a, b, step( a, before ), step( b, before ) } );
        return out;
    }

    void expand( const TwinNode& n, std::vector< TwinNode >& out ) const
    {
        for ( auto a : _m.successors( n.s1 ) )
        {
            const auto ma = step( a, n.m1 );
            for ( auto b : _m.successors( n.s2 ) )
                if ( _m.observation( a ) == _m.observation( b ) )
                    out.push_back( { a, b, ma, step( b, n.m2 ) } );
        }
    }

    bool critical( const TwinNode& n ) const
    {
        return fdi::memory_satisfies( _phi, n.m1 ) && !fdi::memory_satisfies( _phi, n.m2 );
    }
};

std::pair< Trace, Trace > project( const std::vector< TwinNode >& nodes, const std::vector< std::uint32_t >& path )
{
    std::pair< Trace, Trace > out;
    for ( auto id : path )
    {
        out.first.steps.push_back( nodes[ id ].s1 );
        out.second.steps.push_back( nodes[ id ].s2 );
    }
    return out;
}

DiagnosabilityResult check_exact( const SystemModel& m, const PastFormula& phi, bool parallel )
{
    const TwinPlant twin{ m, phi };
    auto g = detail::explore< TwinNode, TwinHash >(
        twin.roots(), [ & ]( const TwinNode& n, std::vector< TwinNode >& out ) { twin.expand( n, out ); },
        [ & ]( const TwinNode& n ) { return twin.critical( n ); }, true, parallel );

    DiagnosabilityResult r;
    r.explored = g.nodes.size();
    const std::size_t last = g.layer_count() - 1;
    bool found = false;
    for ( std::size_t id = g.layer_start[ last ]; id < g.layer_start[ last + 1 ]; ++id )
        found = found || twin.critical( g.nodes[ id ] );
    if ( !found )
        return r;

    auto path = detail::least_path_to_last_layer( g, [ & ]( const TwinNode& n ) { return twin.critical( n ); } );
    auto [ w, c ] = project( g.nodes, path );
    r.diagnosable = false;
    r.pair = CriticalPair{ std::move( w ), { std::move( c ) }, last - phi.n, std::nullopt };
    return r;
}

DiagnosabilityResult check_finite( const SystemModel& m, const PastFormula& phi, bool parallel )
{
    const TwinPlant twin{ m, phi };
    auto g = detail::explore< TwinNode, TwinHash >(
        twin.roots(), [ & ]( const TwinNode& n, std::vector< TwinNode >& out ) { twin.expand( n, out ); },
        []( const TwinNode& ) { return false; }, false, parallel );

    DiagnosabilityResult r;
    r.explored = g.nodes.size();
    const auto scc = detail::strongly_connected( g.succ );
    // Memory bits are monotone, so a cyclic component lies entirely inside or
    // outside the region "occurred on side 1, not on side 2".
    std::optional< std::uint32_t > entry;
    for ( std::uint32_t id = 0; id < g.nodes.size() && !entry; ++id )
        if ( scc.cyclic[ scc.component[ id ] ] && twin.critical( g.nodes[ id ] ) )
            entry = id;
    if ( !entry )
        return r;

    const auto comp = scc.component[ *entry ];
    auto path = detail::tree_path( g, *entry );
    const std::size_t loop_start = path.size() - 1;
    auto cycle = detail::shortest_cycle( g.succ, *entry, [ & ]( std::uint32_t v ) { return scc.component[ v ] == comp; } );
    path.insert( path.end(), cycle->begin(), cycle->end() );

    auto [ w, c ] = project( g.nodes, path );
    std::size_t t = 0;
    while ( !phi.beta.evaluate( m.valuation( w.steps[ t ] ) ) )
        ++t;
    r.diagnosable = false;
    r.pair = CriticalPair{ std::move( w ), { std::move( c ) }, t, loop_start };
    return r;
}

// Bounded delay: the witness run paired with the belief its observations
// induce, plus the age of the oldest obligation not yet met by certainty.
constexpr std::uint32_t no_obligation = std::numeric_limits< std::uint32_t >::max();

struct WindowNode
{
    StateId s = 0;
    std::uint32_t age = no_obligation;
    belief::Belief belief;

    friend bool operator==( const WindowNode&, const WindowNode& ) = default;
    friend auto operator<=>( const WindowNode&, const WindowNode& ) = default;
};

struct WindowHash
{
    std::size_t operator()( const WindowNode& n ) const
    {
        std::size_t h = 0;
        detail::hash_combine( h, n.s );
        detail::hash_combine( h, n.age );
        detail::hash_combine( h, belief::BeliefHash{}( n.belief ) );
        return h;
    }
};

DiagnosabilityResult check_bounded( const SystemModel& m, const PastFormula& phi, bool parallel )
{
    const belief::Tracker tracker{ m, { phi } };
    const auto n = phi.n;

    auto settle = [ & ]( WindowNode& node, std::uint32_t prev_age ) {
        node.age = prev_age == no_obligation ? no_obligation : prev_age + 1;
        if ( node.age == no_obligation && phi.beta.evaluate( m.valuation( node.s ) ) )
            node.age = 0;
        if ( tracker.certain( node.belief, 0 ) )
            node.age = no_obligation;
    };
    auto violated = [ & ]( const WindowNode& node ) { return node.age == n; };

    std::vector< WindowNode > roots;
    std::map< Observation, belief::Belief > initial;
    for ( auto s : m.initial_states() )
    {
        auto [ it, fresh ] = initial.try_emplace( m.observation( s ) );
        if ( fresh )
            it->second = tracker.initial( it->first );
        WindowNode node{ s, no_obligation, it->second };
        settle( node, no_obligation );
        roots.push_back( std::move( node ) );
    }

    auto expand = [ & ]( const WindowNode& node, std::vector< WindowNode >& out ) {
        std::map< Observation, belief::Belief > next;
        for ( auto s : m.successors( node.s ) )
        {
            auto [ it, fresh ] = next.try_emplace( m.observation( s ) );
            if ( fresh )
                it->second = tracker.advance( node.belief, it->first );
            WindowNode succ{ s, no_obligation, it->second };
            settle( succ, node.age );
            out.push_back( std::move( succ ) );
        }
    };

    auto g = detail::explore< WindowNode, WindowHash >( std::move( roots ), expand, violated, true, parallel );
    DiagnosabilityResult r;
    r.explored = g.nodes.size();
    const std::size_t last = g.layer_count() - 1;
    bool found = false;
    for ( std::size_t id = g.layer_start[ last ]; id < g.layer_start[ last + 1 ]; ++id )
        found = found || violated( g.nodes[ id ] );
    if ( !found )
        return r;

    const auto path = detail::least_path_to_last_layer( g, violated );
    CriticalPair pair;
    for ( auto id : path )
        pair.witness.steps.push_back( g.nodes[ id ].s );
    pair.t = last - n;
    const auto obs = observation_sequence( m, pair.witness );
    const belief::ObservationLayers layers{ tracker, obs };
    for ( std::size_t tp = pair.t; tp <= last; ++tp )
        pair.confusers.push_back( layers.reconstruct( tp, *layers.first_violating( tp, 0 ) ) );
    r.diagnosable = false;
    r.pair = std::move( pair );
    return r;
}

DiagnosabilityResult check( const SystemModel& m, const fdi::AlarmSpec& spec, bool parallel )
{
    if ( spec.diag != fdi::DiagScope::global )
        throw DiagnosabilityError( "alarm '" + spec.alarm +
                                   "' has trace-level diagnosability; use check_trace_diagnosability" );
    const auto phi = fdi::certainty_formula( spec );
    switch ( phi.kind )
    {
    case DelayKind::exact: return check_exact( m, phi, parallel );
    case DelayKind::bounded: return check_bounded( m, phi, parallel );
    case DelayKind::finite: return check_finite( m, phi, parallel );
    }
    return {};
}

} // namespace

DiagnosabilityResult check_diagnosability( const SystemModel& m, const fdi::AlarmSpec& spec )
{
    return check( m, spec, true );
}

DiagnosabilityResult check_diagnosability_serial( const SystemModel& m, const fdi::AlarmSpec& spec )
{
    return check( m, spec, false );
}

TraceDiagnosis check_trace_diagnosability( const SystemModel& m, const fdi::AlarmSpec& spec, const Trace& tr,
                                           std::size_t t )
{
    if ( !is_trace_of( m, tr ) )
        throw DiagnosabilityError( "the given state sequence is not a trace of the model" );
    if ( t >= tr.size() )
        throw DiagnosabilityError( "time index " + std::to_string( t ) + " outside trace of length " +
                                   std::to_string( tr.size() ) );
    if ( !spec.beta.evaluate( m.valuation( tr.steps[ t ] ) ) )
        throw DiagnosabilityError( "diagnosis condition '" + spec.beta_text + "' does not hold at step " +
                                   std::to_string( t ) );

    const auto phi = fdi::certainty_formula( spec );
    const belief::Tracker tracker{ m, { phi } };
    const auto obs = observation_sequence( m, tr );
    const belief::ObservationLayers layers{ tracker, obs };
    auto too_short = [ & ]( std::size_t need ) {
        return DiagnosabilityError( "trace too short: " + fdi::to_string( spec.delay ) + " at step " +
                                    std::to_string( t ) + " needs " + std::to_string( need ) + " steps, got " +
                                    std::to_string( tr.size() ) );
    };

    TraceDiagnosis out;
    switch ( phi.kind )
    {
    case DelayKind::exact:
    {
        const std::size_t at = t + phi.n;
        if ( at >= tr.size() )
            throw too_short( at + 1 );
        if ( auto bad = layers.first_violating( at, 0 ) )
            out.confusers.push_back( layers.reconstruct( at, *bad ) );
        else
        {
            out.diagnosable = true;
            out.certain_at = at;
        }
        return out;
    }
    case DelayKind::bounded:
    {
        for ( std::size_t at = t; at <= t + phi.n; ++at )
        {
            if ( at >= tr.size() )
                throw too_short( t + phi.n + 1 );
            auto bad = layers.first_violating( at, 0 );
            if ( !bad )
            {
                out.diagnosable = true;
                out.certain_at = at;
                out.confusers.clear();
                return out;
            }
            out.confusers.push_back( layers.reconstruct( at, *bad ) );
        }
        return out;
    }
    case DelayKind::finite:
    {
        for ( std::size_t at = t; at < tr.size(); ++at )
            if ( !layers.first_violating( at, 0 ) )
            {
                out.diagnosable = true;
                out.certain_at = at;
                return out;
            }
        const auto end = tr.size() - 1;
        out.confusers.push_back( layers.reconstruct( end, *layers.first_violating( end, 0 ) ) );
        return out;
    }
    }
    return out;
}

bool is_valid_critical_pair( const SystemModel& m, const fdi::AlarmSpec& spec, const CriticalPair& pair )
{
    const auto phi = fdi::certainty_formula( spec );
    const auto& w = pair.witness;
    if ( !is_trace_of( m, w ) || pair.t >= w.size() || pair.confusers.empty() )
        return false;
    if ( !spec.beta.evaluate( m.valuation( w.steps[ pair.t ] ) ) )
        return false;
    const auto wobs = observation_sequence( m, w );
    for ( const auto& c : pair.confusers )
    {
        if ( !is_trace_of( m, c ) || c.size() > w.size() )
            return false;
        const auto cobs = observation_sequence( m, c );
        if ( !std::equal( cobs.begin(), cobs.end(), wobs.begin() ) )
            return false;
        if ( fdi::eval_past( m, c, phi, c.size() - 1 ) )
            return false;
    }

    switch ( phi.kind )
    {
    case DelayKind::exact:
        return pair.confusers.size() == 1 && w.size() == pair.t + phi.n + 1 && pair.confusers[ 0 ].size() == w.size();
    case DelayKind::bounded:
        if ( w.size() != pair.t + phi.n + 1 || pair.confusers.size() != phi.n + 1 )
            return false;
        for ( std::size_t i = 0; i < pair.confusers.size(); ++i )
            if ( pair.confusers[ i ].size() != pair.t + i + 1 )
                return false;
        return true;
    case DelayKind::finite:
    {
        if ( pair.confusers.size() != 1 || !pair.loop_start || *pair.loop_start >= w.size() )
            return false;
        const auto& c = pair.confusers[ 0 ];
        if ( c.size() != w.size() )
            return false;
        auto closes = [ & ]( const Trace& tr ) {
            const auto succ = m.successors( tr.steps.back() );
            return std::binary_search( succ.begin(), succ.end(), tr.steps[ *pair.loop_start ] );
        };
        // The confuser repeats its loop forever, so it must never see beta.
        return closes( w ) && closes( c ) &&
               std::none_of( c.steps.begin(), c.steps.end(),
                             [ & ]( StateId s ) { return spec.beta.evaluate( m.valuation( s ) ); } );
    }
    }
    return false;
}

nlohmann::json to_json( const SystemModel& m, const fdi::AlarmSpec& spec, const DiagnosabilityResult& r )
{
    nlohmann::json j;
    j[ "alarm" ] = spec.alarm;
    j[ "delay" ] = fdi::to_string( spec.delay );
    j[ "diagnosable" ] = r.diagnosable;
    j[ "explored" ] = r.explored;
    if ( r.pair )
    {
        nlohmann::json p;
        p[ "t" ] = r.pair->t;
        p[ "witness" ] = trace_names( m, r.pair->witness );
        p[ "confusers" ] = nlohmann::json::array();
        for ( const auto& c : r.pair->confusers )
            p[ "confusers" ].push_back( trace_names( m, c ) );
        if ( r.pair->loop_start )
            p[ "loop_start" ] = *r.pair->loop_start;
        j[ "critical_pair" ] = std::move( p );
    }
    return j;
}

nlohmann::json to_json( const SystemModel& m, const TraceDiagnosis& r )
{
    nlohmann::json j;
    j[ "diagnosable" ] = r.diagnosable;
    j[ "certain_at" ] = r.certain_at ? nlohmann::json( *r.certain_at ) : nlohmann::json();
    j[ "confusers" ] = nlohmann::json::array();
    for ( const auto& c : r.confusers )
        j[ "confusers" ].push_back( trace_names( m, c ) );
    return j;
}

} // namespace mbsa::diag

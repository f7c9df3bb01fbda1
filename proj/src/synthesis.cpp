#include "mbsa/synthesis.hpp"

#include "search_detail.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <sstream>
#include <tuple>

namespace mbsa::synth
{

using fdi::DelayKind;
using fdi::Memory;

std::size_t Diagnoser::alarm_index( std::string_view alarm ) const
{
    auto it = std::find( alarms.begin(), alarms.end(), alarm );
    if ( it == alarms.end() )
        throw SynthesisError( "diagnoser has no alarm '" + std::string( alarm ) + "'" );
    return static_cast< std::size_t >( it - alarms.begin() );
}

std::vector< std::string > Diagnoser::annotation( std::size_t node ) const
{
    std::vector< std::string > out;
    for ( std::size_t a = 0; a < alarms.size(); ++a )
        if ( raised.at( node )[ a ] )
            out.push_back( alarms[ a ] );
    std::sort( out.begin(), out.end() );
    return out;
}

namespace
{

Diagnoser synthesize( const SystemModel& m, std::span< const fdi::AlarmSpec > specs, bool parallel )
{
    std::vector< fdi::PastFormula > formulas;
    Diagnoser d;
    for ( const auto& s : specs )
    {
        if ( std::find( d.alarms.begin(), d.alarms.end(), s.alarm ) != d.alarms.end() )
            throw SynthesisError( "duplicate alarm name '" + s.alarm + "'" );
        d.alarms.push_back( s.alarm );
        formulas.push_back( fdi::certainty_formula( s ) );
    }
    for ( auto a : m.observable_atoms() )
        d.observables.push_back( m.atom_names()[ a ] );

    const belief::Tracker tracker{ m, std::move( formulas ) };
    std::vector< belief::Belief > roots;
    for ( auto o : tracker.initial_observations() )
        roots.push_back( tracker.initial( o ) );

    auto expand = [ & ]( const belief::Belief& b, std::vector< belief::Belief >& out ) {
        for ( auto o : tracker.next_observations( b ) )
            out.push_back( tracker.advance( b, o ) );
    };
    auto g = detail::explore< belief::Belief, belief::BeliefHash >(
        std::move( roots ), expand, []( const belief::Belief& ) { return false; }, false, parallel );

    const std::size_t n = g.nodes.size();
    d.delta.resize( n );
    d.raised.assign( n, std::vector< bool >( d.alarms.size() ) );
    for ( std::size_t id = 0; id < n; ++id )
    {
        d.node_names.push_back( "n" + std::to_string( id ) );
        const auto& b = g.nodes[ id ];
        for ( std::size_t a = 0; a < d.alarms.size(); ++a )
            d.raised[ id ][ a ] = tracker.certain( b, a );
        for ( auto s : g.succ[ id ] )
            d.delta[ id ][ m.observation( g.nodes[ s ].front().state ) ] = s;
    }
    for ( std::size_t id = 0; id < g.layer_start[ 1 ]; ++id )
        d.entry[ m.observation( g.nodes[ id ].front().state ) ] = id;
    d.beliefs = std::move( g.nodes );
    return d;
}

} // namespace

Diagnoser synthesize_diagnoser( const SystemModel& m, std::span< const fdi::AlarmSpec > specs )
{
    return synthesize( m, specs, true );
}

Diagnoser synthesize_diagnoser_serial( const SystemModel& m, std::span< const fdi::AlarmSpec > specs )
{
    return synthesize( m, specs, false );
}

std::vector< std::vector< std::string > > run_diagnoser( const Diagnoser& d, std::span< const Observation > obs )
{
    std::vector< std::vector< std::string > > out;
    std::size_t node = 0;
    for ( std::size_t k = 0; k < obs.size(); ++k )
    {
        const auto& table = k == 0 ? d.entry : d.delta[ node ];
        auto it = table.find( obs[ k ] );
        if ( it == table.end() )
        {
            std::ostringstream msg;
            msg << "impossible observation at step " << k << ": " << observation_to_json( d, obs[ k ] ).dump();
            throw SynthesisError( msg.str() );
        }
        node = it->second;
        out.push_back( d.annotation( node ) );
    }
    return out;
}

Observation to_diagnoser_observation( const SystemModel& m, const Diagnoser& d, Observation o )
{
    const auto obs = m.observable_atoms();
    if ( obs.size() != d.observables.size() )
        throw SynthesisError( "observation alphabet mismatch: model has " + std::to_string( obs.size() ) +
                              " observables, diagnoser " + std::to_string( d.observables.size() ) );
    Observation out = 0;
    for ( std::size_t i = 0; i < obs.size(); ++i )
    {
        const auto& name = m.atom_names()[ obs[ i ] ];
        auto it = std::find( d.observables.begin(), d.observables.end(), name );
        if ( it == d.observables.end() )
            throw SynthesisError( "observation alphabet mismatch: '" + name + "' is not observed by the diagnoser" );
        if ( ( o >> i ) & 1U )
            out |= Observation{ 1 } << ( it - d.observables.begin() );
    }
    return out;
}

// ---------------------------------------------------------------------------
// Verification

bool Verdict::holds() const
{
    return std::all_of( conjuncts.begin(), conjuncts.end(), []( const ConjunctVerdict& c ) { return c.holds; } );
}

const ConjunctVerdict& Verdict::conjunct( fdi::Role role ) const
{
    for ( const auto& c : conjuncts )
        if ( c.role == role )
            return c;
    throw SynthesisError( "pattern has no " + fdi::to_string( role ) + " conjunct" );
}

namespace
{

constexpr std::uint32_t stuck = std::numeric_limits< std::uint32_t >::max();

// One step of the product: model state, formula memory, candidate node,
// knowledge tracker node and the obligation registers of the pattern.
struct ProductNode
{
    StateId s = 0;
    Memory mem = 0;
    std::uint32_t d = 0;
    std::uint32_t k = 0;
    std::uint64_t pending = 0;  // bounded: beta steps not yet served; finite: bit 0
    std::uint64_t known = 0;    // bounded, trace row: pending steps that became certain

    friend bool operator==( const ProductNode&, const ProductNode& ) = default;
    friend auto operator<=>( const ProductNode&, const ProductNode& ) = default;
};

struct ProductHash
{
    std::size_t operator()( const ProductNode& n ) const
    {
        std::size_t h = 0;
        detail::hash_combine( h, n.s );
        detail::hash_combine( h, n.mem );
        detail::hash_combine( h, n.d );
        detail::hash_combine( h, n.k );
        detail::hash_combine( h, n.pending );
        detail::hash_combine( h, n.known );
        return h;
    }
};

class Product
{
    const SystemModel& _m;
    const Diagnoser& _d;
    const Diagnoser& _knowledge;
    const fdi::AlarmSpec& _spec;
    fdi::PastFormula _phi;
    std::size_t _alarm;
    std::vector< Observation > _dobs;  // per model state
    std::uint64_t _window;

public:
    Product( const SystemModel& m, const Diagnoser& d, const Diagnoser& knowledge, const fdi::AlarmSpec& spec )
        : _m{ m }, _d{ d }, _knowledge{ knowledge }, _spec{ spec }, _phi{ fdi::certainty_formula( spec ) },
          _alarm{ d.alarm_index( spec.alarm ) }
    {
        for ( StateId s = 0; s < m.state_count(); ++s )
            _dobs.push_back( to_diagnoser_observation( m, d, m.observation( s ) ) );
        _window = ( std::uint64_t{ 1 } << ( _phi.n + 1 ) ) - 1;
    }

    [[nodiscard]] bool alarm( const ProductNode& n ) const { return n.d != stuck && _d.raised[ n.d ][ _alarm ]; }
    [[nodiscard]] bool knows( const ProductNode& n ) const { return _knowledge.raised[ n.k ][ 0 ]; }
    [[nodiscard]] bool satisfied( const ProductNode& n ) const { return fdi::memory_satisfies( _phi, n.mem ); }

    ProductNode enter( StateId s, const ProductNode* prev ) const
    {
        ProductNode n;
        n.s = s;
        const bool beta = _spec.beta.evaluate( _m.valuation( s ) );
        n.mem = fdi::memory_step( _phi, prev ? prev->mem : fdi::memory_before_start( _phi ), beta );

        const auto& dt = prev ? _d.delta[ prev->d ] : _d.entry;
        auto dit = dt.find( _dobs[ s ] );
        n.d = dit == dt.end() ? stuck : static_cast< std::uint32_t >( dit->second );
        const auto& kt = prev ? _knowledge.delta[ prev->k ] : _knowledge.entry;
        n.k = static_cast< std::uint32_t >( kt.at( _m.observation( s ) ) );
        if ( n.d == stuck )
            return n;

        const bool a = alarm( n );
        switch ( _phi.kind )
        {
        case DelayKind::exact: break;
        case DelayKind::bounded:
            n.pending = ( ( prev ? prev->pending << 1 : 0 ) | ( beta ? 1U : 0U ) ) & _window;
            if ( _spec.diag == fdi::DiagScope::trace )
            {
                n.known = ( prev ? prev->known << 1 : 0 ) & _window;
                if ( knows( n ) )
                    n.known |= n.pending;
            }
            if ( a )
                n.pending = n.known = 0;
            break;
        case DelayKind::finite: n.pending = ( ( prev && prev->pending ) || beta ) && !a ? 1 : 0; break;
        }
        return n;
    }

    void expand( const ProductNode& n, std::vector< ProductNode >& out ) const
    {
        for ( auto s : _m.successors( n.s ) )
            out.push_back( enter( s, &n ) );
    }

    [[nodiscard]] bool correctness_violated( const ProductNode& n ) const { return alarm( n ) && !satisfied( n ); }
    [[nodiscard]] bool maximality_violated( const ProductNode& n ) const { return knows( n ) && !alarm( n ); }

    // Safety part of completeness; finite delays are handled as lassos.
    [[nodiscard]] bool completeness_violated( const ProductNode& n ) const
    {
        const bool global = _spec.diag == fdi::DiagScope::global;
        switch ( _phi.kind )
        {
        case DelayKind::exact: return global ? satisfied( n ) && !alarm( n ) : knows( n ) && !alarm( n );
        case DelayKind::bounded:
            return ( ( global ? n.pending : n.pending & n.known ) >> _phi.n ) & 1U;
        case DelayKind::finite: return false;
        }
        return false;
    }

    // Region an unserved-obligation cycle must stay in.
    [[nodiscard]] bool unserved( const ProductNode& n ) const
    {
        return n.pending != 0 && ( _spec.diag == fdi::DiagScope::global || knows( n ) );
    }
};

Trace states_of( const detail::ExploredGraph< ProductNode >& g, const std::vector< std::uint32_t >& path )
{
    Trace tr;
    for ( auto id : path )
        tr.steps.push_back( g.nodes[ id ].s );
    return tr;
}

template < class Pred >
void check_safety( const detail::ExploredGraph< ProductNode >& g, ConjunctVerdict& v, const Pred& violated )
{
    for ( std::uint32_t id = 0; id < g.nodes.size(); ++id )
        if ( g.nodes[ id ].d != stuck && violated( g.nodes[ id ] ) )
        {
            v.holds = false;
            v.counterexample = states_of( g, detail::tree_path( g, id ) );
            return;
        }
}

void check_liveness( const detail::ExploredGraph< ProductNode >& g, const Product& p, ConjunctVerdict& v )
{
    // Components are not closed under the region, so search cycles inside it.
    std::vector< std::vector< std::uint32_t > > region_succ( g.nodes.size() );
    std::vector< char > in_region( g.nodes.size() );
    for ( std::uint32_t id = 0; id < g.nodes.size(); ++id )
        in_region[ id ] = g.nodes[ id ].d != stuck && p.unserved( g.nodes[ id ] );
    for ( std::uint32_t id = 0; id < g.nodes.size(); ++id )
        if ( in_region[ id ] )
            for ( auto w : g.succ[ id ] )
                if ( in_region[ w ] )
                    region_succ[ id ].push_back( w );
    const auto rscc = detail::strongly_connected( region_succ );
    for ( std::uint32_t id = 0; id < g.nodes.size(); ++id )
    {
        if ( !in_region[ id ] || !rscc.cyclic[ rscc.component[ id ] ] )
            continue;
        const auto comp = rscc.component[ id ];
        auto path = detail::tree_path( g, id );
        v.loop_start = path.size() - 1;
        auto cycle =
            detail::shortest_cycle( region_succ, id, [ & ]( std::uint32_t w ) { return rscc.component[ w ] == comp; } );
        path.insert( path.end(), cycle->begin(), cycle->end() );
        v.holds = false;
        v.counterexample = states_of( g, path );
        return;
    }
}

} // namespace

Verdict verify_diagnoser( const SystemModel& m, const Diagnoser& d, const fdi::AlarmSpec& spec )
{
    const std::array< fdi::AlarmSpec, 1 > single{ spec };
    const auto knowledge = synthesize_diagnoser( m, single );
    const Product p{ m, d, knowledge, spec };

    std::vector< ProductNode > roots;
    for ( auto s : m.initial_states() )
        roots.push_back( p.enter( s, nullptr ) );
    auto g = detail::explore< ProductNode, ProductHash >(
        std::move( roots ), [ & ]( const ProductNode& n, std::vector< ProductNode >& out ) { p.expand( n, out ); },
        []( const ProductNode& n ) { return n.d == stuck; }, false, true );

    for ( std::uint32_t id = 0; id < g.nodes.size(); ++id )
        if ( g.nodes[ id ].d == stuck )
        {
            const auto path = states_of( g, detail::tree_path( g, id ) );
            std::ostringstream msg;
            msg << "diagnoser is not total: no transition for observation "
                << observation_to_json( d, to_diagnoser_observation( m, d, m.observation( path.steps.back() ) ) ).dump()
                << " at step " << path.size() - 1 << " of trace";
            for ( const auto& name : trace_names( m, path ) )
                msg << ' ' << name;
            throw SynthesisError( msg.str() );
        }

    Verdict v;
    v.alarm = spec.alarm;
    v.product_nodes = g.nodes.size();
    for ( const auto& c : fdi::instantiate_pattern( spec ).conjuncts )
    {
        ConjunctVerdict cv;
        cv.role = c.role;
        cv.formula = fdi::to_string( c.formula );
        switch ( c.role )
        {
        case fdi::Role::correctness:
            check_safety( g, cv, [ & ]( const ProductNode& n ) { return p.correctness_violated( n ); } );
            break;
        case fdi::Role::maximality:
            check_safety( g, cv, [ & ]( const ProductNode& n ) { return p.maximality_violated( n ); } );
            break;
        case fdi::Role::completeness:
            if ( spec.delay.kind == DelayKind::finite )
                check_liveness( g, p, cv );
            else
                check_safety( g, cv, [ & ]( const ProductNode& n ) { return p.completeness_violated( n ); } );
            break;
        }
        v.conjuncts.push_back( std::move( cv ) );
    }
    return v;
}

nlohmann::json to_json( const SystemModel& m, const Verdict& v )
{
    nlohmann::json j;
    j[ "alarm" ] = v.alarm;
    j[ "holds" ] = v.holds();
    j[ "product_nodes" ] = v.product_nodes;
    j[ "conjuncts" ] = nlohmann::json::array();
    for ( const auto& c : v.conjuncts )
    {
        nlohmann::json cj{ { "role", fdi::to_string( c.role ) }, { "formula", c.formula }, { "holds", c.holds } };
        if ( c.counterexample )
            cj[ "counterexample" ] = trace_names( m, *c.counterexample );
        if ( c.loop_start )
            cj[ "loop_start" ] = *c.loop_start;
        j[ "conjuncts" ].push_back( std::move( cj ) );
    }
    return j;
}

// ---------------------------------------------------------------------------
// Files

Observation observation_from_json( const Diagnoser& d, const nlohmann::json& j )
{
    if ( !j.is_object() )
        throw SynthesisError( "observation must be an object of atom:bool" );
    Observation o = 0;
    for ( const auto& [ key, value ] : j.items() )
    {
        auto it = std::find( d.observables.begin(), d.observables.end(), key );
        if ( it == d.observables.end() )
            throw SynthesisError( "observation mentions '" + key + "', which is not observable" );
        if ( !value.is_boolean() )
            throw SynthesisError( "observation value for '" + key + "' is not a boolean" );
        if ( value.get< bool >() )
            o |= Observation{ 1 } << ( it - d.observables.begin() );
    }
    if ( j.size() != d.observables.size() )
        throw SynthesisError( "observation must assign every observable" );
    return o;
}

nlohmann::json observation_to_json( const Diagnoser& d, Observation o )
{
    nlohmann::json j = nlohmann::json::object();
    for ( std::size_t i = 0; i < d.observables.size(); ++i )
        j[ d.observables[ i ] ] = ( ( o >> i ) & 1U ) != 0;
    return j;
}

nlohmann::json diagnoser_to_json( const Diagnoser& d )
{
    nlohmann::json j;
    j[ "observables" ] = d.observables;
    j[ "alarms" ] = d.alarms;
    j[ "nodes" ] = nlohmann::json::object();
    for ( std::size_t n = 0; n < d.node_count(); ++n )
        j[ "nodes" ][ d.node_names[ n ] ] = d.annotation( n );

    // Canonical order by names so that a load/save round trip is byte-stable.
    std::vector< std::pair< std::string, nlohmann::json > > entry;
    for ( const auto& [ o, n ] : d.entry )
        entry.emplace_back( observation_to_json( d, o ).dump(),
                            nlohmann::json{ { "obs", observation_to_json( d, o ) }, { "node", d.node_names[ n ] } } );
    std::sort( entry.begin(), entry.end(), []( const auto& a, const auto& b ) { return a.first < b.first; } );
    j[ "entry" ] = nlohmann::json::array();
    for ( auto& e : entry )
        j[ "entry" ].push_back( std::move( e.second ) );

    std::vector< std::tuple< std::string, std::string, nlohmann::json > > delta;
    for ( std::size_t n = 0; n < d.node_count(); ++n )
        for ( const auto& [ o, to ] : d.delta[ n ] )
            delta.emplace_back( d.node_names[ n ], observation_to_json( d, o ).dump(),
                                nlohmann::json{ { "from", d.node_names[ n ] },
                                                { "obs", observation_to_json( d, o ) },
                                                { "to", d.node_names[ to ] } } );
    std::sort( delta.begin(), delta.end(), []( const auto& a, const auto& b ) {
        return std::tie( std::get< 0 >( a ), std::get< 1 >( a ) ) < std::tie( std::get< 0 >( b ), std::get< 1 >( b ) );
    } );
    j[ "delta" ] = nlohmann::json::array();
    for ( auto& e : delta )
        j[ "delta" ].push_back( std::move( std::get< 2 >( e ) ) );
    return j;
}

namespace
{

std::vector< std::string > string_list( const nlohmann::json& j, const char* key )
{
    auto it = j.find( key );
    if ( it == j.end() || !it->is_array() )
        throw SynthesisError( std::string( "diagnoser file needs a '" ) + key + "' list" );
    std::vector< std::string > out;
    for ( const auto& v : *it )
    {
        if ( !v.is_string() )
            throw SynthesisError( std::string( "'" ) + key + "' entries must be strings" );
        out.push_back( v.get< std::string >() );
    }
    std::set< std::string > unique( out.begin(), out.end() );
    if ( unique.size() != out.size() )
        throw SynthesisError( std::string( "duplicate name in '" ) + key + "'" );
    return out;
}

} // namespace

Diagnoser diagnoser_from_json( const nlohmann::json& j )
{
    if ( !j.is_object() )
        throw SynthesisError( "diagnoser file must be an object" );
    Diagnoser d;
    d.observables = string_list( j, "observables" );
    d.alarms = string_list( j, "alarms" );
    if ( d.observables.size() > 64 )
        throw SynthesisError( "at most 64 observables are supported" );

    auto nodes = j.find( "nodes" );
    if ( nodes == j.end() || !nodes->is_object() || nodes->empty() )
        throw SynthesisError( "diagnoser file needs a nonempty 'nodes' object" );
    std::map< std::string, std::size_t > index;
    for ( const auto& [ name, alarms ] : nodes->items() )
    {
        index.emplace( name, d.node_names.size() );
        d.node_names.push_back( name );
        std::vector< bool > raised( d.alarms.size() );
        if ( !alarms.is_array() )
            throw SynthesisError( "node '" + name + "' must list its alarms" );
        for ( const auto& a : alarms )
        {
            if ( !a.is_string() )
                throw SynthesisError( "node '" + name + "' lists a non-string alarm" );
            raised[ d.alarm_index( a.get< std::string >() ) ] = true;
        }
        d.raised.push_back( std::move( raised ) );
    }
    d.delta.resize( d.node_names.size() );

    auto node_ref = [ & ]( const nlohmann::json& e, const char* key ) {
        auto it = e.find( key );
        if ( it == e.end() || !it->is_string() )
            throw SynthesisError( std::string( "transition lacks '" ) + key + "'" );
        auto n = index.find( it->get< std::string >() );
        if ( n == index.end() )
            throw SynthesisError( "unknown diagnoser node '" + it->get< std::string >() + "'" );
        return n->second;
    };
    auto obs_of = [ & ]( const nlohmann::json& e ) {
        auto it = e.find( "obs" );
        if ( it == e.end() )
            throw SynthesisError( "transition lacks 'obs'" );
        return observation_from_json( d, *it );
    };

    auto entry = j.find( "entry" );
    if ( entry == j.end() || !entry->is_array() || entry->empty() )
        throw SynthesisError( "diagnoser file needs a nonempty 'entry' list" );
    for ( const auto& e : *entry )
    {
        const auto o = obs_of( e );
        const auto n = node_ref( e, "node" );
        if ( !d.entry.emplace( o, n ).second )
            throw SynthesisError( "nondeterministic diagnoser: two entries for observation " +
                                  observation_to_json( d, o ).dump() );
    }
    auto delta = j.find( "delta" );
    if ( delta == j.end() || !delta->is_array() )
        throw SynthesisError( "diagnoser file needs a 'delta' list" );
    for ( const auto& e : *delta )
    {
        const auto from = node_ref( e, "from" );
        const auto o = obs_of( e );
        const auto to = node_ref( e, "to" );
        if ( !d.delta[ from ].emplace( o, to ).second )
            throw SynthesisError( "nondeterministic diagnoser: node '" + d.node_names[ from ] +
                                  "' has two transitions on observation " + observation_to_json( d, o ).dump() );
    }
    return d;
}

Diagnoser load_diagnoser( const std::filesystem::path& path )
{
    return diagnoser_from_json( parse_json_strict( read_text_file( path ) ) );
}

namespace
{

std::string obs_label( const Diagnoser& d, Observation o )
{
    std::string out;
    for ( std::size_t i = 0; i < d.observables.size(); ++i )
        if ( ( o >> i ) & 1U )
            out += ( out.empty() ? "" : "," ) + d.observables[ i ];
    return out.empty() ? "-" : out;
}

} // namespace

std::string export_diagnoser_dot( const Diagnoser& d )
{
    std::ostringstream out;
    out << "digraph diagnoser {\n  rankdir=LR;\n  node [shape=box];\n  start [shape=point];\n";
    for ( std::size_t n = 0; n < d.node_count(); ++n )
    {
        std::string alarms;
        for ( const auto& a : d.annotation( n ) )
            alarms += ( alarms.empty() ? "" : "," ) + a;
        out << "  \"" << d.node_names[ n ] << "\" [label=\"" << d.node_names[ n ] << "\\n{" << alarms << "}\"";
        if ( !alarms.empty() )
            out << ", peripheries=2";
        out << "];\n";
    }
    for ( const auto& [ o, n ] : d.entry )
        out << "  start -> \"" << d.node_names[ n ] << "\" [label=\"" << obs_label( d, o ) << "\"];\n";
    for ( std::size_t n = 0; n < d.node_count(); ++n )
        for ( const auto& [ o, to ] : d.delta[ n ] )
            out << "  \"" << d.node_names[ n ] << "\" -> \"" << d.node_names[ to ] << "\" [label=\"" << obs_label( d, o )
                << "\"];\n";
    out << "}\n";
    return out.str();
}

} // namespace mbsa::synth

#include "mbsa/tfpg.hpp"

#include "tfpg_detail.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <stdexcept>

namespace mbsa::tfpg
{

// ---------------------------------------------------------------------------
// Node maps

nlohmann::json NodeMap::to_json() const
{
    nlohmann::json j;
    j[ "nodes" ] = nlohmann::json::object();
    for ( const auto& [ name, p ] : nodes )
        j[ "nodes" ][ name ] = p.all_of.empty() ? nlohmann::json( p.text ) : nlohmann::json{ { "all_of", p.all_of } };
    j[ "modes" ] = nlohmann::json::object();
    for ( std::size_t i = 0; i < modes.size(); ++i )
        j[ "modes" ][ modes[ i ].first ] = mode_texts[ i ];
    return j;
}

namespace
{

Expr parse_predicate( const SystemModel& m, const std::string& owner, const std::string& text )
{
    try
    {
        return m.parse_expr( text );
    }
    catch ( const ExprError& e )
    {
        throw TfpgError( "predicate of '" + owner + "': " + e.what() );
    }
}

} // namespace

NodeMap parse_node_map( const SystemModel& m, const Tfpg& g, const nlohmann::json& j )
{
    if ( !j.is_object() )
        throw TfpgError( "node map must be an object" );
    const nlohmann::json nodes = j.contains( "nodes" ) ? j[ "nodes" ] : nlohmann::json::object();
    if ( !nodes.is_object() )
        throw TfpgError( "node map 'nodes' must be an object" );
    for ( const auto& [ name, value ] : nodes.items() )
        if ( !g.nodes.contains( name ) )
            throw TfpgError( "node map entry for unknown node '" + name + "'" );

    NodeMap nm;
    for ( const auto& [ name, kind ] : g.nodes )
    {
        auto it = nodes.find( name );
        if ( it == nodes.end() )
            throw TfpgError( "unmapped node '" + name + "'" );
        NodeMap::Predicate p;
        if ( it->is_string() )
        {
            p.text = it->get< std::string >();
            p.expr = parse_predicate( m, name, p.text );
            if ( kind == NodeKind::failure_mode )
            {
                std::size_t atom = 0;
                const auto faults = m.fault_atoms();
                if ( !p.expr.is_single_atom( &atom ) || std::find( faults.begin(), faults.end(), atom ) == faults.end() )
                    throw TfpgError( "failure mode '" + name + "' must map to a fault atom" );
            }
        }
        else if ( it->is_object() && it->contains( "all_of" ) && ( *it )[ "all_of" ].is_array() )
        {
            if ( kind == NodeKind::failure_mode )
                throw TfpgError( "failure mode '" + name + "' must map to a fault atom" );
            for ( const auto& member : ( *it )[ "all_of" ] )
            {
                if ( !member.is_string() || !g.nodes.contains( member.get< std::string >() ) )
                    throw TfpgError( "'all_of' of '" + name + "' must list TFPG nodes" );
                const auto& ref = nodes.find( member.get< std::string >() );
                if ( ref == nodes.end() || !ref->is_string() )
                    throw TfpgError( "'all_of' of '" + name + "' may only list nodes mapped to expressions" );
                p.all_of.push_back( member.get< std::string >() );
            }
            if ( p.all_of.empty() )
                throw TfpgError( "'all_of' of '" + name + "' is empty" );
            std::sort( p.all_of.begin(), p.all_of.end() );
        }
        else
            throw TfpgError( "node '" + name + "' must map to an expression string or {\"all_of\": [...]}" );
        nm.nodes.emplace( name, std::move( p ) );
    }

    const auto mode_atoms = m.mode_atoms();
    const nlohmann::json* modes = j.contains( "modes" ) ? &j[ "modes" ] : nullptr;
    if ( modes && !modes->is_object() )
        throw TfpgError( "node map 'modes' must be an object" );
    if ( modes )
        for ( const auto& [ name, value ] : modes->items() )
            if ( std::find( g.modes.begin(), g.modes.end(), name ) == g.modes.end() )
                throw TfpgError( "node map entry for undeclared mode '" + name + "'" );
    std::set< std::size_t > used;
    for ( const auto& mode : g.modes )
    {
        std::string text;
        if ( modes && modes->contains( mode ) )
        {
            if ( !( *modes )[ mode ].is_string() )
                throw TfpgError( "mode '" + mode + "' must map to an expression string" );
            text = ( *modes )[ mode ].get< std::string >();
        }
        else if ( !mode_atoms.empty() )
            text = mode;  // identity mapping onto a mode atom of the same name
        else if ( g.modes.size() == 1 )
            text = "true";
        else
            throw TfpgError( "unmapped mode '" + mode + "'" );

        auto expr = parse_predicate( m, mode, text );
        if ( !mode_atoms.empty() )
        {
            std::size_t atom = 0;
            if ( !expr.is_single_atom( &atom ) ||
                 std::find( mode_atoms.begin(), mode_atoms.end(), atom ) == mode_atoms.end() )
                throw TfpgError( "mode '" + mode + "' must map to a mode atom" );
            if ( !used.insert( atom ).second )
                throw TfpgError( "mode atom '" + m.atom_names()[ atom ] + "' is mapped twice" );
        }
        nm.modes.emplace_back( mode, std::move( expr ) );
        nm.mode_texts.push_back( std::move( text ) );
    }
    if ( !mode_atoms.empty() && used.size() != mode_atoms.size() )
        throw TfpgError( "mode map is not a bijection onto the model's mode atoms" );
    return nm;
}

// ---------------------------------------------------------------------------
// Trace scanning

namespace
{

constexpr std::uint8_t no_mode = 0xff;

// Node predicates and modes precomputed per model state.
struct Labeling
{
    const detail::Compiled& c;
    std::vector< std::uint64_t > holds;       // per state: bit v = expression of node v holds
    std::vector< std::uint8_t > mode;         // per state
    std::vector< std::vector< std::size_t > > all_of;  // per node; empty for expression nodes

    Labeling( const detail::Compiled& compiled, const SystemModel& m, const NodeMap& nm ) : c{ compiled }
    {
        if ( c.names.size() > 64 )
            throw TfpgError( "behavioral analysis supports at most 64 TFPG nodes" );
        all_of.resize( c.names.size() );
        for ( std::size_t v = 0; v < c.names.size(); ++v )
            for ( const auto& member : nm.nodes.at( c.names[ v ] ).all_of )
                all_of[ v ].push_back( c.node_index( member ) );

        // Mode exclusivity is only required where the model can actually be.
        std::vector< char > reachable( m.state_count() );
        std::vector< StateId > stack( m.initial_states().begin(), m.initial_states().end() );
        for ( auto s : stack )
            reachable[ s ] = 1;
        while ( !stack.empty() )
        {
            const auto s = stack.back();
            stack.pop_back();
            for ( auto n : m.successors( s ) )
                if ( !reachable[ n ] )
                {
                    reachable[ n ] = 1;
                    stack.push_back( n );
                }
        }

        holds.resize( m.state_count() );
        mode.assign( m.state_count(), no_mode );
        for ( StateId s = 0; s < m.state_count(); ++s )
        {
            const auto& val = m.valuation( s );
            for ( std::size_t v = 0; v < c.names.size(); ++v )
                if ( all_of[ v ].empty() && nm.nodes.at( c.names[ v ] ).expr.evaluate( val ) )
                    holds[ s ] |= std::uint64_t{ 1 } << v;
            std::size_t count = 0;
            for ( std::size_t i = 0; i < nm.modes.size(); ++i )
                if ( nm.modes[ i ].second.evaluate( val ) )
                {
                    ++count;
                    mode[ s ] = static_cast< std::uint8_t >( i );
                }
            if ( reachable[ s ] && count != 1 )
                throw TfpgError( "state '" + m.state_name( s ) + "' satisfies " + std::to_string( count ) +
                                 " mode predicates (expected exactly one)" );
        }
    }

    void induce( std::span< const StateId > tr, std::vector< int >& act, std::vector< std::uint8_t >& modes ) const
    {
        act.assign( c.names.size(), detail::never );
        modes.resize( tr.size() );
        std::uint64_t seen = 0;
        for ( std::size_t t = 0; t < tr.size(); ++t )
        {
            modes[ t ] = mode[ tr[ t ] ];
            auto fresh = holds[ tr[ t ] ] & ~seen;
            seen |= fresh;
            for ( ; fresh; fresh &= fresh - 1 )
                act[ static_cast< std::size_t >( __builtin_ctzll( fresh ) ) ] = static_cast< int >( t );
        }
        for ( std::size_t v = 0; v < c.names.size(); ++v )
        {
            if ( all_of[ v ].empty() )
                continue;
            int latest = 0;
            for ( auto u : all_of[ v ] )
                latest = act[ u ] == detail::never || latest == detail::never ? detail::never : std::max( latest, act[ u ] );
            act[ v ] = latest;
        }
    }
};

// Prefixes in lexicographic order, expanded until there is enough parallel work.
std::vector< std::vector< StateId > > prefixes( const SystemModel& m, unsigned horizon )
{
    std::vector< std::vector< StateId > > out;
    for ( auto s : m.initial_states() )
        out.push_back( { s } );
    while ( out.size() < 256 && !out.empty() && out.front().size() < horizon )
    {
        std::vector< std::vector< StateId > > next;
        for ( const auto& p : out )
            for ( auto s : m.successors( p.back() ) )
            {
                next.push_back( p );
                next.back().push_back( s );
            }
        out = std::move( next );
    }
    return out;
}

// Depth-first completion of `prefix` to `horizon` states in lexicographic
// order; stops when `leaf` returns true.
template < class Leaf >
bool complete_prefix( const SystemModel& m, std::vector< StateId > path, unsigned horizon, Leaf& leaf )
{
    if ( path.size() == horizon )
        return leaf( std::span< const StateId >( path ) );
    std::vector< std::size_t > next{ 0 };
    const std::size_t base = path.size();
    while ( !next.empty() )
    {
        const auto succ = m.successors( path.back() );
        auto& i = next.back();
        if ( i == succ.size() )
        {
            next.pop_back();
            if ( path.size() > base )
                path.pop_back();
            continue;
        }
        path.push_back( succ[ i++ ] );
        if ( path.size() == horizon )
        {
            if ( leaf( std::span< const StateId >( path ) ) )
                return true;
            path.pop_back();
        }
        else
            next.push_back( 0 );
    }
    return false;
}

void require_horizon( unsigned horizon )
{
    if ( horizon == 0 )
        throw TfpgError( "horizon must be at least 1" );
}

BehavioralResult validate( const Tfpg& g, const SystemModel& m, const NodeMap& nm, unsigned horizon, bool parallel )
{
    require_horizon( horizon );
    const detail::Compiled c{ g };
    const Labeling lab{ c, m, nm };
    const auto work = prefixes( m, horizon );

    std::vector< std::optional< Trace > > found( work.size() );
    std::vector< std::uint64_t > counted( work.size() );
    std::atomic< std::size_t > best{ work.size() };
    const auto n = static_cast< std::ptrdiff_t >( work.size() );
#pragma omp parallel for schedule( dynamic, 1 ) if ( parallel )
    for ( std::ptrdiff_t p = 0; p < n; ++p )
    {
        if ( static_cast< std::size_t >( p ) > best.load() )
            continue;
        std::vector< int > act;
        std::vector< std::uint8_t > modes;
        auto leaf = [ & ]( std::span< const StateId > tr ) {
            ++counted[ p ];
            lab.induce( tr, act, modes );
            if ( detail::check( c, act, modes, nullptr ) )
                return false;
            found[ p ] = Trace{ { tr.begin(), tr.end() } };
            return true;
        };
        if ( complete_prefix( m, work[ p ], horizon, leaf ) )
        {
            auto cur = best.load();
            while ( static_cast< std::size_t >( p ) < cur && !best.compare_exchange_weak( cur, p ) )
            {
            }
        }
    }

    BehavioralResult r;
    for ( std::size_t p = 0; p < work.size(); ++p )
        if ( found[ p ] )
        {
            r.complete = false;
            r.witness = found[ p ];
            std::vector< int > act;
            std::vector< std::uint8_t > modes;
            lab.induce( r.witness->steps, act, modes );
            detail::check( c, act, modes, &r.violations );
            return r;
        }
    for ( auto k : counted )
        r.traces += k;
    return r;
}

} // namespace

ActivationTrace induced_activation_trace( const SystemModel& m, const Tfpg& g, const NodeMap& nm, const Trace& tr )
{
    if ( tr.steps.empty() )
        throw TfpgError( "empty trace" );
    const detail::Compiled c{ g };
    const Labeling lab{ c, m, nm };
    std::vector< int > act;
    std::vector< std::uint8_t > modes;
    lab.induce( tr.steps, act, modes );
    return detail::to_trace( c, act, modes );
}

BehavioralResult behavioral_validate( const Tfpg& g, const SystemModel& m, const NodeMap& nm, unsigned horizon )
{
    return validate( g, m, nm, horizon, true );
}

BehavioralResult behavioral_validate_serial( const Tfpg& g, const SystemModel& m, const NodeMap& nm, unsigned horizon )
{
    return validate( g, m, nm, horizon, false );
}

// ---------------------------------------------------------------------------
// Tightening

namespace
{

struct EdgeStats
{
    int lo = std::numeric_limits< int >::max();  // least attributed delay
    int hi = -1;                                  // largest attributed delay
    int waiting = -1;                             // largest clock before the target activated

    void merge( const EdgeStats& o )
    {
        lo = std::min( lo, o.lo );
        hi = std::max( hi, o.hi );
        waiting = std::max( waiting, o.waiting );
    }
};

} // namespace

TightenResult tighten_edges( const Tfpg& g, const SystemModel& m, const NodeMap& nm, unsigned horizon )
{
    require_horizon( horizon );
    const auto before = behavioral_validate( g, m, nm, horizon );
    if ( !before.complete )
        throw TfpgError( "cannot tighten a TFPG that is incomplete at horizon " + std::to_string( horizon ) + ": " +
                         before.violations.front().message );

    const detail::Compiled c{ g };
    const Labeling lab{ c, m, nm };
    const auto work = prefixes( m, horizon );
    const auto n = static_cast< std::ptrdiff_t >( work.size() );
    std::vector< std::vector< EdgeStats > > partial( work.size(), std::vector< EdgeStats >( c.edges.size() ) );

#pragma omp parallel for schedule( dynamic, 1 )
    for ( std::ptrdiff_t p = 0; p < n; ++p )
    {
        std::vector< int > act;
        std::vector< std::uint8_t > modes;
        std::vector< int > clock;
        auto& stats = partial[ p ];
        auto leaf = [ & ]( std::span< const StateId > tr ) {
            lab.induce( tr, act, modes );
            for ( std::size_t e = 0; e < c.edges.size(); ++e )
            {
                const auto& edge = c.edges[ e ];
                detail::edge_clock( edge, act, modes, clock );
                const int tv = act[ edge.to ];
                const int end = tv == detail::never ? static_cast< int >( modes.size() ) : tv;
                for ( int t = 0; t < end; ++t )
                    stats[ e ].waiting = std::max( stats[ e ].waiting, clock[ t ] );
                if ( tv == detail::never || clock[ tv ] < 0 )
                    continue;
                const auto d = static_cast< unsigned >( clock[ tv ] );
                if ( d < edge.tmin || d > edge.tmax )
                    continue;
                stats[ e ].lo = std::min( stats[ e ].lo, clock[ tv ] );
                stats[ e ].hi = std::max( stats[ e ].hi, clock[ tv ] );
            }
            return false;
        };
        complete_prefix( m, work[ p ], horizon, leaf );
    }

    std::vector< EdgeStats > stats( c.edges.size() );
    for ( const auto& part : partial )
        for ( std::size_t e = 0; e < stats.size(); ++e )
            stats[ e ].merge( part[ e ] );

    TightenResult r;
    r.graph = g;
    for ( std::size_t e = 0; e < g.edges.size(); ++e )
    {
        auto& edge = r.graph.edges[ e ];
        const auto& s = stats[ e ];
        if ( s.hi < 0 )
        {
            r.never_exercised.push_back( to_string( edge ) + " never exercised at horizon " + std::to_string( horizon ) );
            continue;
        }
        // Keep the deadline beyond every clock value seen while the target
        // was still waiting, otherwise the edge would become due too early.
        const auto keep = static_cast< unsigned >( std::max( s.hi, s.waiting + 1 ) );
        edge.tmin = static_cast< unsigned >( s.lo );
        edge.tmax = std::min( edge.tmax, keep );
    }
    normalize( r.graph );

    const auto after = behavioral_validate( r.graph, m, nm, horizon );
    if ( !after.complete )
        throw std::logic_error( "tightened TFPG is incomplete: " + after.violations.front().message );
    return r;
}

} // namespace mbsa::tfpg

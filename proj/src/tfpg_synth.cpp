#include "mbsa/cutsets.hpp"
#include "mbsa/tfpg.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <set>
#include <tuple>
#include <stdexcept>

namespace mbsa::tfpg
{

SynthesisRequest synthesis_request_from_json( const SystemModel& m, const nlohmann::json& j )
{
    if ( !j.is_object() )
        throw TfpgError( "synthesis request must be an object" );
    SynthesisRequest r;
    if ( !j.contains( "failure_modes" ) || !j[ "failure_modes" ].is_array() )
        throw TfpgError( "synthesis request needs a 'failure_modes' list" );
    for ( const auto& f : j[ "failure_modes" ] )
    {
        if ( !f.is_string() )
            throw TfpgError( "failure mode names must be strings" );
        r.failure_modes.push_back( f.get< std::string >() );
    }
    if ( !j.contains( "discrepancies" ) || !j[ "discrepancies" ].is_object() )
        throw TfpgError( "synthesis request needs a 'discrepancies' object" );
    for ( const auto& [ name, d ] : j[ "discrepancies" ].items() )
    {
        DiscrepancyRequest dr;
        dr.name = name;
        if ( d.is_string() )
            dr.pred = d.get< std::string >();
        else if ( d.is_object() && d.contains( "pred" ) && d[ "pred" ].is_string() )
        {
            dr.pred = d[ "pred" ].get< std::string >();
            const auto kind = d.value( "kind", std::string( "OR" ) );
            if ( kind == "AND" )
                dr.intent = NodeKind::and_node;
            else if ( kind != "OR" )
                throw TfpgError( "discrepancy '" + name + "' has kind '" + kind + "' (expected OR or AND)" );
        }
        else
            throw TfpgError( "discrepancy '" + name + "' needs a 'pred' string" );
        r.discrepancies.push_back( std::move( dr ) );
    }
    if ( j.contains( "modes" ) )
    {
        if ( !j[ "modes" ].is_object() )
            throw TfpgError( "'modes' must map mode names to predicates" );
        for ( const auto& [ mode, pred ] : j[ "modes" ].items() )
        {
            if ( !pred.is_string() )
                throw TfpgError( "mode '" + mode + "' must map to a predicate string" );
            r.modes.emplace_back( mode, pred.get< std::string >() );
        }
    }
    else if ( !m.mode_atoms().empty() )
    {
        for ( auto a : m.mode_atoms() )
            r.modes.emplace_back( m.atom_names()[ a ], m.atom_names()[ a ] );
        std::sort( r.modes.begin(), r.modes.end() );
    }
    else
        r.modes.emplace_back( "nominal", "true" );

    std::set< std::string > seen;
    for ( const auto& f : r.failure_modes )
    {
        if ( !seen.insert( f ).second )
            throw TfpgError( "failure mode '" + f + "' is listed twice" );
        const auto fault = std::find_if( m.fault_atoms().begin(), m.fault_atoms().end(),
                                         [ & ]( std::size_t a ) { return m.atom_names()[ a ] == f; } );
        if ( fault == m.fault_atoms().end() )
            throw TfpgError( "failure mode '" + f + "' is not a fault atom of the model" );
    }
    auto check_pred = [ & ]( const std::string& what, const std::string& pred ) {
        try
        {
            (void)m.parse_expr( pred );
        }
        catch ( const ExprError& e )
        {
            throw TfpgError( what + ": " + e.what() );
        }
    };
    for ( const auto& d : r.discrepancies )
    {
        if ( seen.contains( d.name ) )
            throw TfpgError( "discrepancy '" + d.name + "' clashes with a failure mode" );
        check_pred( "discrepancy '" + d.name + "'", d.pred );
    }
    for ( const auto& [ mode, pred ] : r.modes )
        check_pred( "mode '" + mode + "'", pred );
    return r;
}

namespace
{

struct Cause
{
    std::string name;
    bool fault = false;
    std::size_t atom = 0;  // fault atom, or index of the discrepancy predicate
};

// Model extended with latches that record, one step late, that an earlier
// discrepancy predicate has held. Latches and failure modes are its faults.
struct LatchedModel
{
    SystemModel model;
    std::vector< std::uint64_t > cause_mask;  // per product state: bit i = cause i holds
};

LatchedModel latched_model( const SystemModel& m, const std::vector< Cause >& causes, const std::vector< Expr >& preds )
{
    std::vector< std::size_t > latches;  // cause indices that are latches
    for ( std::size_t i = 0; i < causes.size(); ++i )
        if ( !causes[ i ].fault )
            latches.push_back( i );

    SystemModel::Parts parts;
    parts.atoms = m.atom_names();
    for ( const auto& c : causes )
        if ( c.fault )
            parts.faults.push_back( m.atom_names()[ c.atom ] );
    for ( auto i : latches )
    {
        parts.atoms.push_back( "@latch_" + causes[ i ].name );
        parts.faults.push_back( parts.atoms.back() );
    }

    // Latch bit k of a product state corresponds to latches[k].
    std::vector< std::uint64_t > fires( m.state_count() );
    for ( StateId s = 0; s < m.state_count(); ++s )
        for ( std::size_t k = 0; k < latches.size(); ++k )
            if ( preds[ causes[ latches[ k ] ].atom ].evaluate( m.valuation( s ) ) )
                fires[ s ] |= std::uint64_t{ 1 } << k;

    std::map< std::pair< StateId, std::uint64_t >, std::size_t > index;
    std::vector< std::pair< StateId, std::uint64_t > > states;
    std::deque< std::size_t > queue;
    auto intern = [ & ]( StateId s, std::uint64_t l ) {
        auto [ it, fresh ] = index.emplace( std::make_pair( s, l ), states.size() );
        if ( fresh )
        {
            states.emplace_back( s, l );
            queue.push_back( it->second );
        }
        return it->second;
    };
    for ( auto s : m.initial_states() )
        intern( s, 0 );
    std::vector< std::pair< std::size_t, std::size_t > > edges;
    while ( !queue.empty() )
    {
        const auto id = queue.front();
        queue.pop_front();
        const auto [ s, l ] = states[ id ];
        for ( auto n : m.successors( s ) )
            edges.emplace_back( id, intern( n, l | fires[ s ] ) );
    }

    auto name = [ & ]( std::size_t id ) { return m.state_name( states[ id ].first ) + "#" + std::to_string( states[ id ].second ); };
    std::vector< std::uint64_t > cause_mask;
    for ( std::size_t id = 0; id < states.size(); ++id )
    {
        const auto [ s, l ] = states[ id ];
        parts.state_names.push_back( name( id ) );
        auto val = m.valuation( s );
        val.resize( parts.atoms.size(), false );
        std::uint64_t mask = 0;
        for ( std::size_t k = 0; k < latches.size(); ++k )
            if ( ( l >> k ) & 1U )
            {
                val[ m.atom_names().size() + k ] = true;
                mask |= std::uint64_t{ 1 } << latches[ k ];
            }
        for ( std::size_t i = 0; i < causes.size(); ++i )
            if ( causes[ i ].fault && val[ causes[ i ].atom ] )
                mask |= std::uint64_t{ 1 } << i;
        parts.valuations.push_back( std::move( val ) );
        cause_mask.push_back( mask );
    }
    for ( auto s : m.initial_states() )
        parts.initial.push_back( name( index.at( { s, 0 } ) ) );
    for ( const auto& [ a, b ] : edges )
        parts.transitions.emplace_back( name( a ), name( b ) );
    return { SystemModel{ std::move( parts ) }, std::move( cause_mask ) };
}

// Cause index of every fault atom / latch of the latched model, in its fault order.
std::vector< std::size_t > fault_order( const std::vector< Cause >& causes )
{
    std::vector< std::size_t > order;
    for ( std::size_t i = 0; i < causes.size(); ++i )
        if ( causes[ i ].fault )
            order.push_back( i );
    for ( std::size_t i = 0; i < causes.size(); ++i )
        if ( !causes[ i ].fault )
            order.push_back( i );
    return order;
}

std::string unique_name( const std::string& base, const std::map< std::string, NodeKind >& taken )
{
    if ( !taken.contains( base ) )
        return base;
    for ( std::size_t k = 2;; ++k )
        if ( auto n = base + "_" + std::to_string( k ); !taken.contains( n ) )
            return n;
}

unsigned add_bounds( unsigned a, unsigned b ) { return a == infinity || b == infinity ? infinity : a + b; }

} // namespace

SynthesisResult synthesize_tfpg( const SystemModel& m, const SynthesisRequest& request, unsigned horizon )
{
    if ( horizon == 0 )
        throw TfpgError( "horizon must be at least 1" );
    SynthesisResult r;
    Tfpg& g = r.graph;
    nlohmann::json map{ { "nodes", nlohmann::json::object() }, { "modes", nlohmann::json::object() } };

    for ( const auto& [ mode, pred ] : request.modes )
    {
        g.modes.push_back( mode );
        map[ "modes" ][ mode ] = pred;
    }
    if ( g.modes.empty() )
        throw TfpgError( "synthesis request declares no modes" );

    const auto faults = m.fault_atoms();
    std::vector< Cause > fms;
    for ( const auto& f : request.failure_modes )
    {
        const auto atom = m.atom_index( f );
        if ( std::find( faults.begin(), faults.end(), atom ) == faults.end() )
            throw TfpgError( "failure mode '" + f + "' is not a fault atom" );
        if ( g.nodes.contains( f ) )
            throw TfpgError( "failure mode '" + f + "' listed twice" );
        g.nodes.emplace( f, NodeKind::failure_mode );
        map[ "nodes" ][ f ] = f;
        fms.push_back( { f, true, atom } );
    }

    std::vector< Expr > preds;
    for ( const auto& d : request.discrepancies )
    {
        if ( g.nodes.contains( d.name ) )
            throw TfpgError( "discrepancy '" + d.name + "' clashes with a failure mode" );
        try
        {
            preds.push_back( m.parse_expr( d.pred ) );
        }
        catch ( const ExprError& e )
        {
            throw TfpgError( "predicate of '" + d.name + "': " + e.what() );
        }
    }

    // First-reach depth of every discrepancy predicate.
    std::vector< std::size_t > depth( m.state_count(), std::numeric_limits< std::size_t >::max() );
    std::deque< StateId > queue;
    for ( auto s : m.initial_states() )
    {
        depth[ s ] = 0;
        queue.push_back( s );
    }
    while ( !queue.empty() )
    {
        const auto s = queue.front();
        queue.pop_front();
        for ( auto n : m.successors( s ) )
            if ( depth[ n ] == std::numeric_limits< std::size_t >::max() )
            {
                depth[ n ] = depth[ s ] + 1;
                queue.push_back( n );
            }
    }
    std::vector< std::pair< std::size_t, std::size_t > > order;  // (depth, discrepancy)
    for ( std::size_t i = 0; i < request.discrepancies.size(); ++i )
    {
        auto best = std::numeric_limits< std::size_t >::max();
        for ( StateId s = 0; s < m.state_count(); ++s )
            if ( preds[ i ].evaluate( m.valuation( s ) ) )
                best = std::min( best, depth[ s ] );
        if ( best == std::numeric_limits< std::size_t >::max() )
            r.findings.push_back( "discrepancy '" + request.discrepancies[ i ].name +
                                  "' is unreachable even with all faults; excluded" );
        else
            order.emplace_back( best, i );
    }
    std::sort( order.begin(), order.end(), [ & ]( const auto& a, const auto& b ) {
        return std::tie( a.first, request.discrepancies[ a.second ].name ) <
               std::tie( b.first, request.discrepancies[ b.second ].name );
    } );

    // A discrepancy that needs no failure mode cannot be explained by the graph.
    std::vector< std::size_t > included;
    {
        const auto plain = latched_model( m, fms, preds );
        for ( const auto& [ d_depth, d ] : order )
        {
            if ( cutsets::is_cut_set( plain.model, preds[ d ], 0 ) )
                r.findings.push_back( "discrepancy '" + request.discrepancies[ d ].name +
                                      "' is reachable without any failure mode; excluded" );
            else
                included.push_back( d );
        }
    }
    for ( auto d : included )
    {
        g.nodes.emplace( request.discrepancies[ d ].name, NodeKind::or_node );
        map[ "nodes" ][ request.discrepancies[ d ].name ] = request.discrepancies[ d ].pred;
    }

    auto descendants = [ & ]( const std::string& root ) {
        std::set< std::string > seen{ root };
        std::vector< std::string > stack{ root };
        while ( !stack.empty() )
        {
            const auto n = stack.back();
            stack.pop_back();
            for ( const auto& e : g.edges )
                if ( e.from == n && seen.insert( e.to ).second )
                    stack.push_back( e.to );
        }
        return seen;
    };

    // Every other discrepancy is a candidate cause unless it already lies
    // downstream, which keeps the graph acyclic.
    for ( auto d : included )
    {
        const auto& req = request.discrepancies[ d ];
        const auto below = descendants( req.name );
        std::vector< Cause > causes = fms;
        for ( auto e : included )
            if ( !below.contains( request.discrepancies[ e ].name ) )
                causes.push_back( { request.discrepancies[ e ].name, false, e } );
        if ( causes.size() > 30 )
            throw TfpgError( "too many candidate causes for '" + req.name + "' (limit 30)" );

        const auto lm = latched_model( m, causes, preds );
        const auto reports = cutsets::enumerate_mcs( lm.model, preds[ d ] );
        const auto& mcs = reports.back().lower_bound;
        if ( mcs.empty() || mcs.front() == 0 )
            throw std::logic_error( "cause analysis of '" + req.name + "' contradicts its reachability" );

        // implied_by[y] = causes true in every reachable state where y is.
        std::vector< std::uint64_t > implied_by( causes.size(), ~std::uint64_t{ 0 } );
        for ( auto mask : lm.cause_mask )
            for ( std::size_t y = 0; y < causes.size(); ++y )
                if ( ( mask >> y ) & 1U )
                    implied_by[ y ] &= mask;

        const auto fault_of = fault_order( causes );
        std::set< std::vector< std::size_t > > sets;
        for ( auto cs : mcs )
        {
            std::vector< std::size_t > members;
            for ( std::size_t k = 0; k < fault_of.size(); ++k )
                if ( ( cs >> k ) & 1U )
                    members.push_back( fault_of[ k ] );
            // Drop members implied by another remaining member, failure modes first.
            std::vector< std::size_t > kept = members;
            for ( auto x : members )
            {
                const bool implied = std::any_of( kept.begin(), kept.end(), [ & ]( std::size_t y ) {
                    return y != x && ( ( implied_by[ y ] >> x ) & 1U );
                } );
                if ( implied )
                    kept.erase( std::find( kept.begin(), kept.end(), x ) );
            }
            std::sort( kept.begin(), kept.end() );
            sets.insert( kept );
        }
        std::vector< std::vector< std::size_t > > family;
        for ( const auto& s : sets )
            if ( std::none_of( sets.begin(), sets.end(), [ & ]( const auto& o ) {
                     return o != s && std::includes( s.begin(), s.end(), o.begin(), o.end() );
                 } ) )
                family.push_back( s );

        auto kind = NodeKind::or_node;
        if ( req.intent == NodeKind::and_node )
        {
            if ( family.size() == 1 && family.front().size() > 1 )
                kind = NodeKind::and_node;
            else
                r.findings.push_back( "discrepancy '" + req.name + "' requested as AND has " +
                                      std::to_string( family.size() ) +
                                      " minimal cause sets that are not a single conjunction; emitted as OR" );
        }
        g.nodes[ req.name ] = kind;

        auto edge = [ & ]( const std::string& from, const std::string& to ) {
            g.edges.push_back( { from, to, 0, infinity, g.modes } );
        };
        if ( kind == NodeKind::and_node )
        {
            for ( auto c : family.front() )
                edge( causes[ c ].name, req.name );
            continue;
        }
        std::size_t fresh = 0;
        for ( const auto& s : family )
        {
            if ( s.size() == 1 )
            {
                edge( causes[ s.front() ].name, req.name );
                continue;
            }
            const auto and_name = unique_name( "and_" + req.name + "_" + std::to_string( ++fresh ), g.nodes );
            g.nodes.emplace( and_name, NodeKind::and_node );
            nlohmann::json members = nlohmann::json::array();
            for ( auto c : s )
            {
                edge( causes[ c ].name, and_name );
                members.push_back( causes[ c ].name );
            }
            map[ "nodes" ][ and_name ] = { { "all_of", members } };
            edge( and_name, req.name );
        }
    }
    normalize( g );

    // Rule 1: merge AND nodes with the same sources and the same target.
    {
        std::map< std::pair< std::vector< std::string >, std::vector< std::string > >, std::string > seen;
        std::set< std::string > dropped;
        for ( const auto& [ name, kind ] : g.nodes )
        {
            if ( kind != NodeKind::and_node || !map[ "nodes" ][ name ].is_object() )
                continue;
            std::vector< std::string > in, out;
            for ( const auto& e : g.edges )
            {
                if ( e.to == name )
                    in.push_back( e.from );
                if ( e.from == name )
                    out.push_back( e.to );
            }
            if ( !seen.emplace( std::make_pair( in, out ), name ).second )
                dropped.insert( name );
        }
        for ( const auto& name : dropped )
        {
            g.nodes.erase( name );
            map[ "nodes" ].erase( name );
        }
        std::erase_if( g.edges, [ & ]( const Edge& e ) { return dropped.contains( e.from ) || dropped.contains( e.to ); } );
    }

    // Rule 2: drop edges subsumed by an identical edge with a superset mode label.
    {
        std::vector< Edge > kept;
        for ( std::size_t i = 0; i < g.edges.size(); ++i )
        {
            const auto& e = g.edges[ i ];
            const bool subsumed = std::any_of( g.edges.begin(), g.edges.end(), [ & ]( const Edge& o ) {
                if ( &o == &e || o.from != e.from || o.to != e.to || o.tmin != e.tmin || o.tmax != e.tmax )
                    return false;
                if ( !std::includes( o.modes.begin(), o.modes.end(), e.modes.begin(), e.modes.end() ) )
                    return false;
                // Among equal labels keep the first occurrence.
                return o.modes != e.modes || &o < &e;
            } );
            if ( !subsumed )
                kept.push_back( e );
        }
        g.edges = std::move( kept );
    }

    g.map = map;
    const auto nm = parse_node_map( m, g, map );
    const auto initial = behavioral_validate( g, m, nm, horizon );
    if ( !initial.complete )
        throw std::logic_error( "synthesized TFPG is incomplete before simplification: " +
                                initial.violations.front().message );

    // Rule 3: transitive reduction among OR edges, kept only when the graph
    // stays complete without the direct edge.
    for ( std::size_t i = 0; i < g.edges.size(); )
    {
        const auto direct = g.edges[ i ];
        const auto kind_of = [ & ]( const std::string& n ) { return g.nodes.at( n ); };
        bool composed = false;
        if ( kind_of( direct.to ) == NodeKind::or_node )
            for ( const auto& a : g.edges )
                for ( const auto& b : g.edges )
                    if ( a.from == direct.from && a.to == b.from && b.to == direct.to &&
                         kind_of( a.to ) == NodeKind::or_node && direct.tmin <= a.tmin + b.tmin &&
                         add_bounds( a.tmax, b.tmax ) <= direct.tmax )
                        composed = true;
        if ( composed )
        {
            auto candidate = g;
            candidate.edges.erase( candidate.edges.begin() + static_cast< std::ptrdiff_t >( i ) );
            if ( behavioral_validate( candidate, m, nm, horizon ).complete )
            {
                g = std::move( candidate );
                continue;
            }
        }
        ++i;
    }

    auto tightened = tighten_edges( g, m, nm, horizon );
    for ( auto& f : tightened.never_exercised )
        r.findings.push_back( std::move( f ) );
    tightened.graph.map = map;
    g = std::move( tightened.graph );

    for ( const auto& f : validate_structure( g ) )
        if ( f.is_error() )
            throw std::logic_error( "synthesized TFPG fails structural validation: " + f.message );
    return r;
}

} // namespace mbsa::tfpg

#include "mbsa/tfpg.hpp"

#include "tfpg_detail.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

namespace mbsa::tfpg
{

std::string to_string( NodeKind k )
{
    switch ( k )
    {
    case NodeKind::failure_mode: return "FM";
    case NodeKind::or_node: return "OR";
    case NodeKind::and_node: return "AND";
    }
    return {};
}

namespace
{

std::string bound( unsigned t ) { return t == infinity ? "inf" : std::to_string( t ); }

NodeKind kind_from_string( const std::string& s )
{
    if ( s == "FM" )
        return NodeKind::failure_mode;
    if ( s == "OR" )
        return NodeKind::or_node;
    if ( s == "AND" )
        return NodeKind::and_node;
    throw TfpgError( "unknown node kind '" + s + "' (expected FM, OR or AND)" );
}

} // namespace

std::string to_string( const Edge& e )
{
    std::string modes;
    for ( const auto& m : e.modes )
        modes += ( modes.empty() ? "" : "," ) + m;
    return e.from + " -> " + e.to + " [" + bound( e.tmin ) + "," + bound( e.tmax ) + "] {" + modes + "}";
}

void normalize( Tfpg& g )
{
    for ( auto& e : g.edges )
    {
        std::sort( e.modes.begin(), e.modes.end() );
        e.modes.erase( std::unique( e.modes.begin(), e.modes.end() ), e.modes.end() );
    }
    std::sort( g.edges.begin(), g.edges.end() );
}

// ---------------------------------------------------------------------------
// Files

Tfpg tfpg_from_json( const nlohmann::json& j )
{
    if ( !j.is_object() )
        throw TfpgError( "TFPG file must be an object" );
    Tfpg g;
    auto modes = j.find( "modes" );
    if ( modes == j.end() || !modes->is_array() || modes->empty() )
        throw TfpgError( "TFPG needs a nonempty 'modes' list" );
    for ( const auto& m : *modes )
    {
        if ( !m.is_string() )
            throw TfpgError( "mode names must be strings" );
        g.modes.push_back( m.get< std::string >() );
    }

    auto nodes = j.find( "nodes" );
    if ( nodes == j.end() || !nodes->is_object() )
        throw TfpgError( "TFPG needs a 'nodes' object" );
    for ( const auto& [ name, spec ] : nodes->items() )
    {
        if ( !spec.is_object() || !spec.contains( "kind" ) || !spec[ "kind" ].is_string() )
            throw TfpgError( "node '" + name + "' needs a string 'kind'" );
        g.nodes.emplace( name, kind_from_string( spec[ "kind" ].get< std::string >() ) );
    }

    auto edges = j.find( "edges" );
    if ( edges != j.end() )
    {
        if ( !edges->is_array() )
            throw TfpgError( "'edges' must be a list" );
        for ( const auto& e : *edges )
        {
            Edge edge;
            auto name = [ & ]( const char* key ) {
                if ( !e.contains( key ) || !e[ key ].is_string() )
                    throw TfpgError( std::string( "edge needs a string '" ) + key + "'" );
                auto n = e[ key ].get< std::string >();
                if ( !g.nodes.contains( n ) )
                    throw TfpgError( "edge references unknown node '" + n + "'" );
                return n;
            };
            edge.from = name( "from" );
            edge.to = name( "to" );
            if ( !e.contains( "tmin" ) || !e[ "tmin" ].is_number_unsigned() )
                throw TfpgError( "edge " + edge.from + " -> " + edge.to + " needs a nonnegative integer 'tmin'" );
            edge.tmin = e[ "tmin" ].get< unsigned >();
            if ( !e.contains( "tmax" ) )
                throw TfpgError( "edge " + edge.from + " -> " + edge.to + " needs 'tmax'" );
            const auto& tmax = e[ "tmax" ];
            if ( tmax.is_string() && tmax.get< std::string >() == "inf" )
                edge.tmax = infinity;
            else if ( tmax.is_number_unsigned() && tmax.get< std::uint64_t >() < infinity )
                edge.tmax = tmax.get< unsigned >();
            else
                throw TfpgError( "edge " + edge.from + " -> " + edge.to + ": 'tmax' must be an integer or \"inf\"" );
            if ( e.contains( "modes" ) )
            {
                if ( !e[ "modes" ].is_array() )
                    throw TfpgError( "edge modes must be a list" );
                for ( const auto& m : e[ "modes" ] )
                {
                    if ( !m.is_string() )
                        throw TfpgError( "edge modes must be strings" );
                    edge.modes.push_back( m.get< std::string >() );
                }
            }
            else
                edge.modes = g.modes;
            g.edges.push_back( std::move( edge ) );
        }
    }
    if ( j.contains( "map" ) )
        g.map = j[ "map" ];
    normalize( g );
    return g;
}

Tfpg load_tfpg( const std::filesystem::path& path ) { return tfpg_from_json( parse_json_strict( read_text_file( path ) ) ); }

nlohmann::json tfpg_to_json( const Tfpg& g )
{
    nlohmann::json j;
    j[ "modes" ] = g.modes;
    j[ "nodes" ] = nlohmann::json::object();
    for ( const auto& [ name, kind ] : g.nodes )
        j[ "nodes" ][ name ] = { { "kind", to_string( kind ) } };
    j[ "edges" ] = nlohmann::json::array();
    for ( const auto& e : g.edges )
    {
        nlohmann::json ej{ { "from", e.from }, { "to", e.to }, { "tmin", e.tmin }, { "modes", e.modes } };
        ej[ "tmax" ] = e.tmax == infinity ? nlohmann::json( "inf" ) : nlohmann::json( e.tmax );
        j[ "edges" ].push_back( std::move( ej ) );
    }
    if ( g.map )
        j[ "map" ] = *g.map;
    return j;
}

std::string export_tfpg_dot( const Tfpg& g )
{
    std::ostringstream out;
    out << "digraph tfpg {\n  rankdir=LR;\n";
    for ( const auto& [ name, kind ] : g.nodes )
    {
        out << "  \"" << name << "\" [";
        switch ( kind )
        {
        case NodeKind::failure_mode: out << "shape=box, style=dotted"; break;
        case NodeKind::and_node: out << "shape=box"; break;
        case NodeKind::or_node: out << "shape=circle"; break;
        }
        out << "];\n";
    }
    for ( const auto& e : g.edges )
    {
        std::string modes;
        for ( const auto& m : e.modes )
            modes += ( modes.empty() ? "" : "," ) + m;
        out << "  \"" << e.from << "\" -> \"" << e.to << "\" [label=\"[" << bound( e.tmin ) << "," << bound( e.tmax )
            << "] {" << modes << "}\"];\n";
    }
    out << "}\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Structure

std::string to_string( Finding::Kind k )
{
    switch ( k )
    {
    case Finding::Kind::consistency: return "consistency";
    case Finding::Kind::necessity: return "necessity";
    case Finding::Kind::possibility: return "possibility";
    case Finding::Kind::cycle: return "cycle";
    }
    return {};
}

std::vector< Finding > validate_structure( const Tfpg& g )
{
    using K = Finding::Kind;
    std::vector< Finding > out;
    const std::set< std::string > declared( g.modes.begin(), g.modes.end() );
    if ( declared.size() != g.modes.size() )
        out.push_back( { K::consistency, "modes", "mode list contains duplicates" } );
    if ( g.modes.size() > 64 )
        out.push_back( { K::consistency, "modes", "more than 64 modes" } );

    std::map< std::string, std::vector< const Edge* > > incoming;
    for ( const auto& e : g.edges )
    {
        const auto label = to_string( e );
        const auto from = g.nodes.find( e.from );
        const auto to = g.nodes.find( e.to );
        if ( from == g.nodes.end() || to == g.nodes.end() )
        {
            out.push_back( { K::consistency, label, "edge references an unknown node" } );
            continue;
        }
        if ( to->second == NodeKind::failure_mode )
            out.push_back( { K::consistency, label, "failure mode '" + e.to + "' has an incoming edge" } );
        if ( e.tmin > e.tmax )
            out.push_back( { K::consistency, label, "tmin exceeds tmax" } );
        if ( e.modes.empty() )
            out.push_back( { K::consistency, label, "empty mode label" } );
        for ( const auto& m : e.modes )
            if ( !declared.contains( m ) )
                out.push_back( { K::consistency, label, "undeclared mode '" + m + "'" } );
        incoming[ e.to ].push_back( &e );
    }

    for ( const auto& [ name, kind ] : g.nodes )
        if ( kind != NodeKind::failure_mode && !incoming.contains( name ) )
            out.push_back( { K::necessity, name, "discrepancy '" + name + "' has no incoming edge" } );

    // Possibility: search (node, common modes so far) from every failure mode.
    std::map< std::string, std::uint64_t > mode_bit;
    for ( std::size_t i = 0; i < g.modes.size() && i < 64; ++i )
        mode_bit[ g.modes[ i ] ] |= std::uint64_t{ 1 } << i;
    const std::uint64_t all = g.modes.size() >= 64 ? ~std::uint64_t{ 0 } : ( std::uint64_t{ 1 } << g.modes.size() ) - 1;
    std::map< std::string, std::vector< const Edge* > > outgoing;
    for ( const auto& e : g.edges )
        if ( g.nodes.contains( e.from ) && g.nodes.contains( e.to ) )
            outgoing[ e.from ].push_back( &e );
    std::set< std::pair< std::string, std::uint64_t > > seen;
    std::deque< std::pair< std::string, std::uint64_t > > queue;
    for ( const auto& [ name, kind ] : g.nodes )
        if ( kind == NodeKind::failure_mode )
        {
            seen.emplace( name, all );
            queue.emplace_back( name, all );
        }
    std::set< std::string > possible;
    while ( !queue.empty() )
    {
        auto [ node, modes ] = queue.front();
        queue.pop_front();
        possible.insert( node );
        for ( const auto* e : outgoing[ node ] )
        {
            std::uint64_t label = 0;
            for ( const auto& m : e->modes )
                if ( auto it = mode_bit.find( m ); it != mode_bit.end() )
                    label |= it->second;
            const auto next = modes & label;
            if ( next != 0 && seen.emplace( e->to, next ).second )
                queue.emplace_back( e->to, next );
        }
    }
    for ( const auto& [ name, kind ] : g.nodes )
        if ( kind != NodeKind::failure_mode && incoming.contains( name ) && !possible.contains( name ) )
            out.push_back( { K::possibility, name,
                             "no path from a failure mode reaches '" + name + "' under a common mode" } );

    // Cycles among discrepancies (warnings).
    std::map< std::string, int > state;  // 0 new, 1 on stack, 2 done
    std::set< std::string > reported;
    std::vector< std::string > stack;
    std::function< void( const std::string& ) > visit = [ & ]( const std::string& v ) {
        state[ v ] = 1;
        stack.push_back( v );
        for ( const auto* e : outgoing[ v ] )
        {
            if ( state[ e->to ] == 1 )
            {
                auto it = std::find( stack.begin(), stack.end(), e->to );
                std::vector< std::string > cyc( it, stack.end() );
                std::sort( cyc.begin(), cyc.end() );
                std::string subject;
                for ( const auto& n : cyc )
                    subject += ( subject.empty() ? "" : "," ) + n;
                if ( reported.insert( subject ).second )
                    out.push_back( { K::cycle, subject, "propagation cycle through " + subject } );
            }
            else if ( state[ e->to ] == 0 )
                visit( e->to );
        }
        stack.pop_back();
        state[ v ] = 2;
    };
    for ( const auto& [ name, kind ] : g.nodes )
        if ( state[ name ] == 0 )
            visit( name );

    std::stable_sort( out.begin(), out.end(), []( const Finding& a, const Finding& b ) {
        return std::tie( a.kind, a.subject ) < std::tie( b.kind, b.subject );
    } );
    return out;
}

// ---------------------------------------------------------------------------
// Semantics

namespace detail
{

Compiled::Compiled( const Tfpg& g ) : modes{ g.modes }
{
    if ( g.modes.empty() || g.modes.size() > 64 )
        throw TfpgError( "a TFPG needs between 1 and 64 modes" );
    for ( const auto& [ name, kind ] : g.nodes )
    {
        names.push_back( name );
        kinds.push_back( kind );
    }
    incoming.resize( names.size() );
    for ( const auto& e : g.edges )
    {
        CompiledEdge c;
        c.from = static_cast< std::uint32_t >( node_index( e.from ) );
        c.to = static_cast< std::uint32_t >( node_index( e.to ) );
        c.tmin = e.tmin;
        c.tmax = e.tmax;
        for ( const auto& m : e.modes )
            c.modes |= std::uint64_t{ 1 } << mode_index( m );
        incoming[ c.to ].push_back( static_cast< std::uint32_t >( edges.size() ) );
        edges.push_back( c );
    }
}

std::size_t Compiled::node_index( const std::string& name ) const
{
    auto it = std::lower_bound( names.begin(), names.end(), name );
    if ( it == names.end() || *it != name )
        throw TfpgError( "unknown TFPG node '" + name + "'" );
    return static_cast< std::size_t >( it - names.begin() );
}

std::size_t Compiled::mode_index( const std::string& name ) const
{
    auto it = std::find( modes.begin(), modes.end(), name );
    if ( it == modes.end() )
        throw TfpgError( "undeclared mode '" + name + "'" );
    return static_cast< std::size_t >( it - modes.begin() );
}

void edge_clock( const CompiledEdge& e, std::span< const int > act, std::span< const std::uint8_t > modes,
                 std::vector< int >& out )
{
    out.assign( modes.size(), -1 );
    const int tu = act[ e.from ];
    if ( tu == never )
        return;
    auto enabled = [ & ]( std::size_t t ) { return ( e.modes >> modes[ t ] ) & 1U; };
    // The clock counts from the start of the current enabled run, but never
    // from before the source activated.
    std::size_t start = 0;
    for ( auto t = static_cast< std::size_t >( tu ); t < modes.size(); ++t )
    {
        if ( !enabled( t ) )
            continue;
        if ( t == static_cast< std::size_t >( tu ) || !enabled( t - 1 ) )
            start = t;
        out[ t ] = static_cast< int >( t - start );
    }
}

namespace
{

bool satisfied( const CompiledEdge& e, int clock )
{
    return clock >= 0 && static_cast< unsigned >( clock ) >= e.tmin && static_cast< unsigned >( clock ) <= e.tmax;
}

bool due( const CompiledEdge& e, int clock ) { return clock >= 0 && e.tmax != infinity && static_cast< unsigned >( clock ) == e.tmax; }

std::string edge_name( const Compiled& c, const CompiledEdge& e ) { return c.names[ e.from ] + " -> " + c.names[ e.to ]; }

} // namespace

bool check( const Compiled& c, std::span< const int > act, std::span< const std::uint8_t > modes,
            std::vector< TraceViolation >* out )
{
    const auto steps = static_cast< int >( modes.size() );
    std::vector< std::vector< int > > clock( c.edges.size() );
    for ( std::size_t e = 0; e < c.edges.size(); ++e )
        edge_clock( c.edges[ e ], act, modes, clock[ e ] );

    bool ok = true;
    auto fail = [ & ]( std::size_t v, const char* kind, std::string msg ) {
        ok = false;
        if ( out )
            out->push_back( { c.names[ v ], kind, std::move( msg ) } );
    };
    for ( std::size_t v = 0; v < c.names.size() && ( ok || out ); ++v )
    {
        const auto kind = c.kinds[ v ];
        if ( kind == NodeKind::failure_mode )
            continue;
        const auto& inc = c.incoming[ v ];
        const int tv = act[ v ];
        const int end = tv == never ? steps : tv;
        const auto at = std::to_string( tv );

        if ( kind == NodeKind::or_node )
        {
            if ( tv != never &&
                 std::none_of( inc.begin(), inc.end(), [ & ]( auto e ) { return satisfied( c.edges[ e ], clock[ e ][ tv ] ); } ) )
                fail( v, "activation", "OR node '" + c.names[ v ] + "' activated at " + at + " with no satisfied incoming edge" );
            for ( auto e : inc )
                for ( int d = 0; d < end; ++d )
                    if ( due( c.edges[ e ], clock[ e ][ d ] ) )
                    {
                        fail( v, "inevitability",
                              "edge " + edge_name( c, c.edges[ e ] ) + " became due at " + std::to_string( d ) + " but '" +
                                  c.names[ v ] + "' had not activated" );
                        break;
                    }
            continue;
        }

        if ( tv != never )
        {
            if ( inc.empty() )
                fail( v, "activation", "AND node '" + c.names[ v ] + "' activated at " + at + " without incoming edges" );
            for ( auto e : inc )
                if ( !satisfied( c.edges[ e ], clock[ e ][ tv ] ) )
                {
                    fail( v, "activation",
                          "AND node '" + c.names[ v ] + "' activated at " + at + " but edge " +
                              edge_name( c, c.edges[ e ] ) + " is not satisfied" );
                    break;
                }
        }
        if ( inc.empty() )
            continue;
        // Forced once every incoming edge has reached its upper bound.
        int deadline = 0;
        for ( auto e : inc )
        {
            int first = steps;
            for ( int d = 0; d < steps && first == steps; ++d )
                if ( due( c.edges[ e ], clock[ e ][ d ] ) )
                    first = d;
            deadline = std::max( deadline, first );
        }
        if ( deadline < end )
            fail( v, "inevitability",
                  "every incoming edge of AND node '" + c.names[ v ] + "' was due by " + std::to_string( deadline ) +
                      " but the node had not activated" );
    }
    return ok;
}

ActivationTrace to_trace( const Compiled& c, std::span< const int > act, std::span< const std::uint8_t > modes )
{
    ActivationTrace at;
    at.horizon = static_cast< unsigned >( modes.size() - 1 );
    for ( auto m : modes )
        at.modes.push_back( c.modes[ m ] );
    for ( std::size_t v = 0; v < c.names.size(); ++v )
        at.activations[ c.names[ v ] ] =
            act[ v ] == never ? std::nullopt : std::optional< unsigned >( static_cast< unsigned >( act[ v ] ) );
    return at;
}

} // namespace detail

ActivationTrace activation_trace_from_json( const nlohmann::json& j )
{
    if ( !j.is_object() || !j.contains( "horizon" ) || !j[ "horizon" ].is_number_unsigned() )
        throw TfpgError( "activation trace needs a nonnegative integer 'horizon'" );
    ActivationTrace at;
    at.horizon = j[ "horizon" ].get< unsigned >();
    if ( !j.contains( "modes" ) || !j[ "modes" ].is_array() )
        throw TfpgError( "activation trace needs a 'modes' list" );
    for ( const auto& m : j[ "modes" ] )
    {
        if ( !m.is_string() )
            throw TfpgError( "activation trace modes must be strings" );
        at.modes.push_back( m.get< std::string >() );
    }
    if ( j.contains( "activations" ) )
    {
        if ( !j[ "activations" ].is_object() )
            throw TfpgError( "'activations' must be an object" );
        for ( const auto& [ node, t ] : j[ "activations" ].items() )
        {
            if ( t.is_null() )
                at.activations[ node ] = std::nullopt;
            else if ( t.is_number_unsigned() )
                at.activations[ node ] = t.get< unsigned >();
            else
                throw TfpgError( "activation of '" + node + "' must be a step or null" );
        }
    }
    return at;
}

nlohmann::json to_json( const ActivationTrace& at )
{
    nlohmann::json j;
    j[ "horizon" ] = at.horizon;
    j[ "modes" ] = at.modes;
    j[ "activations" ] = nlohmann::json::object();
    for ( const auto& [ node, t ] : at.activations )
        j[ "activations" ][ node ] = t ? nlohmann::json( *t ) : nlohmann::json();
    return j;
}

std::vector< TraceViolation > check_trace_consistency( const Tfpg& g, const ActivationTrace& at )
{
    const detail::Compiled c{ g };
    if ( at.modes.size() != std::size_t{ at.horizon } + 1 )
        throw TfpgError( "activation trace has " + std::to_string( at.modes.size() ) + " modes for horizon " +
                         std::to_string( at.horizon ) + " (expected horizon + 1)" );
    std::vector< std::uint8_t > modes;
    for ( const auto& m : at.modes )
        modes.push_back( static_cast< std::uint8_t >( c.mode_index( m ) ) );
    std::vector< int > act( c.names.size(), detail::never );
    for ( const auto& [ node, t ] : at.activations )
    {
        const auto v = c.node_index( node );
        if ( t && *t > at.horizon )
            throw TfpgError( "activation of '" + node + "' at " + std::to_string( *t ) + " exceeds the horizon" );
        act[ v ] = t ? static_cast< int >( *t ) : detail::never;
    }
    std::vector< TraceViolation > out;
    detail::check( c, act, modes, &out );
    return out;
}

// ---------------------------------------------------------------------------
// Enumeration by forward simulation of the edge clocks

namespace
{

class Simulator
{
    const detail::Compiled& _c;
    unsigned _horizon;
    std::vector< int > _fixed;  // per node: -2 free, never, or the fixed step
    const std::function< void( const ActivationTrace& ) >& _visit;

    std::vector< int > _act;
    std::vector< std::uint8_t > _modes;
    std::vector< std::size_t > _fms;
    std::vector< std::size_t > _discs;

public:
    static constexpr int free_input = -2;

    Simulator( const detail::Compiled& c, unsigned horizon, std::vector< int > fixed,
               const std::function< void( const ActivationTrace& ) >& visit )
        : _c{ c }, _horizon{ horizon }, _fixed{ std::move( fixed ) }, _visit{ visit }, _act( c.names.size(), detail::never )
    {
        for ( std::size_t v = 0; v < c.names.size(); ++v )
            ( c.kinds[ v ] == NodeKind::failure_mode ? _fms : _discs ).push_back( v );
    }

    void run() { step( 0, std::vector< int >( _c.edges.size(), -1 ), std::vector< bool >( _c.edges.size(), false ) ); }

private:
    // Clock after step t given the clocks after t-1 and activations up to t.
    std::vector< int > advance( const std::vector< int >& prev, int t ) const
    {
        std::vector< int > now( _c.edges.size(), -1 );
        for ( std::size_t e = 0; e < _c.edges.size(); ++e )
        {
            const auto& edge = _c.edges[ e ];
            const bool running = _act[ edge.from ] != detail::never && ( ( edge.modes >> _modes[ t ] ) & 1U );
            if ( running )
                now[ e ] = prev[ e ] >= 0 ? prev[ e ] + 1 : 0;
        }
        return now;
    }

    bool in_window( std::size_t e, int clock ) const
    {
        return clock >= 0 && static_cast< unsigned >( clock ) >= _c.edges[ e ].tmin &&
               static_cast< unsigned >( clock ) <= _c.edges[ e ].tmax;
    }
    bool at_deadline( std::size_t e, int clock ) const
    {
        return clock >= 0 && _c.edges[ e ].tmax != infinity && static_cast< unsigned >( clock ) == _c.edges[ e ].tmax;
    }

    // Activating exactly the nodes of the current step is allowed, and no
    // inactive node is forced now. `hit` marks edges that have been due.
    bool admissible( const std::vector< int >& clock, const std::vector< bool >& hit, int t ) const
    {
        for ( auto v : _discs )
        {
            const auto& inc = _c.incoming[ v ];
            bool can = false;
            bool forced = false;
            if ( _c.kinds[ v ] == NodeKind::or_node )
            {
                for ( auto e : inc )
                {
                    can = can || in_window( e, clock[ e ] );
                    forced = forced || at_deadline( e, clock[ e ] );
                }
            }
            else if ( !inc.empty() )
            {
                can = true;
                forced = true;
                for ( auto e : inc )
                {
                    can = can && in_window( e, clock[ e ] );
                    forced = forced && hit[ e ];
                }
            }
            if ( _act[ v ] == t && !can )
                return false;
            if ( _act[ v ] == detail::never && forced )
                return false;
        }
        return true;
    }

    void step( int t, const std::vector< int >& prev, const std::vector< bool >& was_due )
    {
        std::vector< std::size_t > free_fms;
        for ( auto v : _fms )
            if ( _act[ v ] == detail::never && _fixed[ v ] == free_input )
                free_fms.push_back( v );
        std::vector< std::size_t > open;
        for ( auto v : _discs )
            if ( _act[ v ] == detail::never )
                open.push_back( v );

        for ( std::uint8_t m = 0; m < _c.modes.size(); ++m )
        {
            _modes.push_back( m );
            for ( auto v : _fms )
                if ( _fixed[ v ] == t )
                    _act[ v ] = t;
            for ( std::uint64_t fs = 0; fs < ( std::uint64_t{ 1 } << free_fms.size() ); ++fs )
                for ( std::uint64_t xs = 0; xs < ( std::uint64_t{ 1 } << open.size() ); ++xs )
                {
                    for ( std::size_t i = 0; i < free_fms.size(); ++i )
                        if ( ( fs >> i ) & 1U )
                            _act[ free_fms[ i ] ] = t;
                    for ( std::size_t i = 0; i < open.size(); ++i )
                        if ( ( xs >> i ) & 1U )
                            _act[ open[ i ] ] = t;

                    const auto clock = advance( prev, t );
                    auto hit = was_due;
                    for ( std::size_t e = 0; e < hit.size(); ++e )
                        hit[ e ] = hit[ e ] || at_deadline( e, clock[ e ] );
                    if ( admissible( clock, hit, t ) )
                    {
                        if ( static_cast< unsigned >( t ) == _horizon )
                            _visit( detail::to_trace( _c, _act, _modes ) );
                        else
                            step( t + 1, clock, hit );
                    }

                    for ( auto v : free_fms )
                        _act[ v ] = detail::never;
                    for ( auto v : open )
                        _act[ v ] = detail::never;
                }
            for ( auto v : _fms )
                if ( _fixed[ v ] == t )
                    _act[ v ] = detail::never;
            _modes.pop_back();
        }
    }
};

} // namespace

void for_each_consistent_trace( const Tfpg& g, unsigned horizon, const std::optional< FmInputs >& fm_inputs,
                                const std::function< void( const ActivationTrace& ) >& visit )
{
    const detail::Compiled c{ g };
    if ( c.names.size() > 8 || horizon > 12 )
        throw TfpgError( "enumeration size guard exceeded: at most 8 nodes and horizon 12 (got " +
                         std::to_string( c.names.size() ) + " nodes, horizon " + std::to_string( horizon ) + ")" );
    std::vector< int > fixed( c.names.size(), Simulator::free_input );
    if ( fm_inputs )
    {
        for ( std::size_t v = 0; v < c.names.size(); ++v )
            if ( c.kinds[ v ] == NodeKind::failure_mode )
                fixed[ v ] = detail::never;
        for ( const auto& [ name, t ] : *fm_inputs )
        {
            const auto v = c.node_index( name );
            if ( c.kinds[ v ] != NodeKind::failure_mode )
                throw TfpgError( "'" + name + "' is not a failure mode" );
            if ( t && *t > horizon )
                throw TfpgError( "activation of '" + name + "' exceeds the horizon" );
            fixed[ v ] = t ? static_cast< int >( *t ) : detail::never;
        }
    }
    Simulator{ c, horizon, std::move( fixed ), visit }.run();
}

std::vector< ActivationTrace > enumerate_consistent_traces( const Tfpg& g, unsigned horizon,
                                                            const std::optional< FmInputs >& fm_inputs )
{
    std::vector< ActivationTrace > out;
    for_each_consistent_trace( g, horizon, fm_inputs, [ & ]( const ActivationTrace& at ) { out.push_back( at ); } );
    return out;
}

} // namespace mbsa::tfpg

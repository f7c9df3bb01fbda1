#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

namespace mbsa::detail
{

inline void hash_combine( std::size_t& seed, std::uint64_t v )
{
    seed ^= std::hash< std::uint64_t >{}( v ) + 0x9e3779b97f4a7c15ULL + ( seed << 6 ) + ( seed >> 2 );
}

inline constexpr std::uint32_t no_parent = std::numeric_limits< std::uint32_t >::max();

/// Graph discovered by `explore`. Node ids follow discovery order, so layer k
/// (nodes at BFS depth k) is the id range [layer_start[k], layer_start[k+1]).
template < class Node >
struct ExploredGraph
{
    std::vector< Node > nodes;
    std::vector< std::size_t > layer_start{ 0 };
    std::vector< std::vector< std::uint32_t > > succ;  // sorted; empty for unexpanded nodes
    std::vector< std::uint32_t > parent;               // first discoverer, no_parent for roots

    [[nodiscard]] std::size_t layer_count() const { return layer_start.size() - 1; }
    [[nodiscard]] std::size_t layer_of( std::uint32_t id ) const
    {
        return static_cast< std::size_t >(
            std::upper_bound( layer_start.begin(), layer_start.end(), std::size_t{ id } ) - layer_start.begin() - 1 );
    }
};

/// Layered breadth-first exploration. Successors of a whole layer are
/// computed concurrently when `parallel` is set; they are merged into the
/// visited map sequentially in frontier order, so ids, edges and parents do
/// not depend on the schedule. Target nodes are not expanded, and with
/// `stop_at_target_layer` the search ends with the first layer holding one.
template < class Node, class Hash, class Expand, class IsTarget >
ExploredGraph< Node > explore( std::vector< Node > roots, const Expand& expand, const IsTarget& is_target,
                               bool stop_at_target_layer, bool parallel )
{
    ExploredGraph< Node > g;
    std::unordered_map< Node, std::uint32_t, Hash > index;
    auto intern = [ & ]( Node&& n, std::uint32_t parent ) {
        auto [ it, fresh ] = index.try_emplace( n, static_cast< std::uint32_t >( g.nodes.size() ) );
        if ( fresh )
        {
            g.nodes.push_back( std::move( n ) );
            g.parent.push_back( parent );
        }
        return it->second;
    };

    std::sort( roots.begin(), roots.end() );
    roots.erase( std::unique( roots.begin(), roots.end() ), roots.end() );
    for ( auto& r : roots )
        intern( std::move( r ), no_parent );

    std::size_t begin = 0;
    while ( begin < g.nodes.size() )
    {
        const std::size_t end = g.nodes.size();
        g.layer_start.push_back( end );
        g.succ.resize( end );

        std::vector< char > target( end - begin );
        for ( std::size_t i = begin; i < end; ++i )
            target[ i - begin ] = is_target( g.nodes[ i ] ) ? 1 : 0;
        if ( stop_at_target_layer && std::find( target.begin(), target.end(), 1 ) != target.end() )
            break;

        std::vector< std::vector< Node > > out( end - begin );
        const auto width = static_cast< std::ptrdiff_t >( end - begin );
#pragma omp parallel for schedule( dynamic, 16 ) if ( parallel )
        for ( std::ptrdiff_t i = 0; i < width; ++i )
            if ( !target[ i ] )
                expand( g.nodes[ begin + i ], out[ i ] );

        for ( std::size_t i = begin; i < end; ++i )
        {
            std::vector< std::uint32_t > ids;
            ids.reserve( out[ i - begin ].size() );
            for ( auto& n : out[ i - begin ] )
                ids.push_back( intern( std::move( n ), static_cast< std::uint32_t >( i ) ) );
            std::sort( ids.begin(), ids.end() );
            ids.erase( std::unique( ids.begin(), ids.end() ), ids.end() );
            g.succ[ i ] = std::move( ids );
        }
        begin = end;
    }
    g.succ.resize( g.nodes.size() );
    return g;
}

/// Path of the least node sequence (compared node by node with `<`) from a
/// root to a target in the last layer. Requires a target in the last layer.
template < class Node, class IsTarget >
std::vector< std::uint32_t > least_path_to_last_layer( const ExploredGraph< Node >& g, const IsTarget& is_target )
{
    const std::size_t last = g.layer_count() - 1;
    std::vector< char > good( g.nodes.size(), 0 );
    for ( std::size_t id = g.layer_start[ last ]; id < g.layer_start[ last + 1 ]; ++id )
        good[ id ] = is_target( g.nodes[ id ] ) ? 1 : 0;
    for ( std::size_t k = last; k-- > 0; )
        for ( std::size_t id = g.layer_start[ k ]; id < g.layer_start[ k + 1 ]; ++id )
            for ( auto s : g.succ[ id ] )
                if ( s >= g.layer_start[ k + 1 ] && s < g.layer_start[ k + 2 ] && good[ s ] )
                {
                    good[ id ] = 1;
                    break;
                }

    auto pick = [ & ]( auto first, auto last_it, std::size_t layer ) {
        std::optional< std::uint32_t > best;
        for ( auto it = first; it != last_it; ++it )
        {
            const auto id = static_cast< std::uint32_t >( *it );
            if ( id < g.layer_start[ layer ] || id >= g.layer_start[ layer + 1 ] || !good[ id ] )
                continue;
            if ( !best || g.nodes[ id ] < g.nodes[ *best ] )
                best = id;
        }
        return *best;
    };

    std::vector< std::uint32_t > roots( g.layer_start[ 1 ] );
    for ( std::uint32_t i = 0; i < roots.size(); ++i )
        roots[ i ] = i;
    std::vector< std::uint32_t > path{ pick( roots.begin(), roots.end(), 0 ) };
    for ( std::size_t k = 1; k <= last; ++k )
        path.push_back( pick( g.succ[ path.back() ].begin(), g.succ[ path.back() ].end(), k ) );
    return path;
}

/// Path of BFS-tree parents from a root to `id`.
template < class Node >
std::vector< std::uint32_t > tree_path( const ExploredGraph< Node >& g, std::uint32_t id )
{
    std::vector< std::uint32_t > path;
    for ( auto cur = id; cur != no_parent; cur = g.parent[ cur ] )
        path.push_back( cur );
    std::reverse( path.begin(), path.end() );
    return path;
}

/// Strongly connected components (iterative Tarjan). Returns the component
/// id of every node and whether that component contains a cycle.
struct SccResult
{
    std::vector< std::uint32_t > component;
    std::vector< char > cyclic;  // per component
};

inline SccResult strongly_connected( const std::vector< std::vector< std::uint32_t > >& succ )
{
    const std::size_t n = succ.size();
    constexpr std::uint32_t unset = std::numeric_limits< std::uint32_t >::max();
    std::vector< std::uint32_t > index( n, unset ), low( n, 0 );
    std::vector< char > on_stack( n, 0 );
    std::vector< std::uint32_t > stack;
    SccResult r;
    r.component.assign( n, unset );
    std::uint32_t counter = 0;

    struct Frame
    {
        std::uint32_t node;
        std::size_t next;
    };
    for ( std::uint32_t root = 0; root < n; ++root )
    {
        if ( index[ root ] != unset )
            continue;
        std::vector< Frame > call{ { root, 0 } };
        index[ root ] = low[ root ] = counter++;
        stack.push_back( root );
        on_stack[ root ] = 1;
        while ( !call.empty() )
        {
            auto& f = call.back();
            if ( f.next < succ[ f.node ].size() )
            {
                const auto w = succ[ f.node ][ f.next++ ];
                if ( index[ w ] == unset )
                {
                    index[ w ] = low[ w ] = counter++;
                    stack.push_back( w );
                    on_stack[ w ] = 1;
                    call.push_back( { w, 0 } );
                }
                else if ( on_stack[ w ] )
                    low[ f.node ] = std::min( low[ f.node ], index[ w ] );
                continue;
            }
            const auto v = f.node;
            call.pop_back();
            if ( !call.empty() )
                low[ call.back().node ] = std::min( low[ call.back().node ], low[ v ] );
            if ( low[ v ] != index[ v ] )
                continue;
            const auto comp = static_cast< std::uint32_t >( r.cyclic.size() );
            std::size_t size = 0;
            bool self_loop = false;
            std::uint32_t w = 0;
            do
            {
                w = stack.back();
                stack.pop_back();
                on_stack[ w ] = 0;
                r.component[ w ] = comp;
                ++size;
                self_loop = self_loop || std::binary_search( succ[ w ].begin(), succ[ w ].end(), w );
            } while ( w != v );
            r.cyclic.push_back( size > 1 || self_loop ? 1 : 0 );
        }
    }
    return r;
}

/// Shortest cycle through `start` using only nodes accepted by `inside`
/// (BFS, least-id discoverers). Returns the nodes after `start` up to and
/// excluding the return to it; empty if `start` is on no such cycle.
template < class Inside >
std::optional< std::vector< std::uint32_t > > shortest_cycle( const std::vector< std::vector< std::uint32_t > >& succ,
                                                             std::uint32_t start, const Inside& inside )
{
    if ( std::binary_search( succ[ start ].begin(), succ[ start ].end(), start ) )
        return std::vector< std::uint32_t >{};
    std::unordered_map< std::uint32_t, std::uint32_t > parent{ { start, no_parent } };
    std::vector< std::uint32_t > frontier{ start };
    while ( !frontier.empty() )
    {
        std::vector< std::uint32_t > next;
        for ( auto v : frontier )
            for ( auto w : succ[ v ] )
            {
                if ( w == start )
                {
                    std::vector< std::uint32_t > path;
                    for ( auto cur = v; cur != start; cur = parent[ cur ] )
                        path.push_back( cur );
                    std::reverse( path.begin(), path.end() );
                    return path;
                }
                if ( !inside( w ) || parent.contains( w ) )
                    continue;
                parent.emplace( w, v );
                next.push_back( w );
            }
        frontier = std::move( next );
    }
    return std::nullopt;
}

} // namespace mbsa::detail

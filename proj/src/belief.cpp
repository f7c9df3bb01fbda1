#include "mbsa/belief.hpp"

#include "search_detail.hpp"

#include <algorithm>

namespace mbsa::belief
{

std::size_t BeliefHash::operator()( const Belief& b ) const
{
    std::size_t h = b.size();
    for ( const auto& mem : b )
    {
        detail::hash_combine( h, mem.state );
        for ( auto v : mem.memory )
            detail::hash_combine( h, v );
    }
    return h;
}

Tracker::Tracker( const SystemModel& m, std::vector< fdi::PastFormula > formulas )
    : _model{ &m }, _formulas{ std::move( formulas ) }
{
}

std::vector< fdi::Memory > Tracker::step( StateId s, std::span< const fdi::Memory > prev ) const
{
    std::vector< fdi::Memory > out( _formulas.size() );
    const auto& val = _model->valuation( s );
    for ( std::size_t i = 0; i < _formulas.size(); ++i )
        out[ i ] = fdi::memory_step( _formulas[ i ], prev[ i ], _formulas[ i ].beta.evaluate( val ) );
    return out;
}

std::vector< fdi::Memory > Tracker::start( StateId s ) const
{
    std::vector< fdi::Memory > prev( _formulas.size() );
    for ( std::size_t i = 0; i < _formulas.size(); ++i )
        prev[ i ] = fdi::memory_before_start( _formulas[ i ] );
    return step( s, prev );
}

namespace
{

void normalize( Belief& b )
{
    std::sort( b.begin(), b.end() );
    b.erase( std::unique( b.begin(), b.end() ), b.end() );
}

} // namespace

Belief Tracker::initial( Observation o ) const
{
    Belief b;
    for ( auto s : _model->initial_states() )
        if ( _model->observation( s ) == o )
            b.push_back( Member{ s, start( s ) } );
    normalize( b );
    return b;
}

Belief Tracker::advance( const Belief& b, Observation o ) const
{
    Belief next;
    for ( const auto& mem : b )
        for ( auto s : _model->successors( mem.state ) )
            if ( _model->observation( s ) == o )
                next.push_back( Member{ s, step( s, mem.memory ) } );
    normalize( next );
    return next;
}

std::vector< Observation > Tracker::next_observations( const Belief& b ) const
{
    std::vector< Observation > out;
    for ( const auto& mem : b )
        for ( auto s : _model->successors( mem.state ) )
            out.push_back( _model->observation( s ) );
    std::sort( out.begin(), out.end() );
    out.erase( std::unique( out.begin(), out.end() ), out.end() );
    return out;
}

std::vector< Observation > Tracker::initial_observations() const
{
    std::vector< Observation > out;
    for ( auto s : _model->initial_states() )
        out.push_back( _model->observation( s ) );
    std::sort( out.begin(), out.end() );
    out.erase( std::unique( out.begin(), out.end() ), out.end() );
    return out;
}

bool Tracker::certain( const Belief& b, std::size_t formula ) const
{
    const auto& phi = _formulas.at( formula );
    return std::all_of( b.begin(), b.end(),
                        [ & ]( const Member& m ) { return fdi::memory_satisfies( phi, m.memory[ formula ] ); } );
}

ObservationLayers::ObservationLayers( const Tracker& tracker, std::span< const Observation > observations )
    : _tracker{ &tracker }
{
    const auto& m = tracker.model();
    for ( std::size_t t = 0; t < observations.size(); ++t )
    {
        // Members are produced in (parent index, successor) order, so keeping
        // the first producer of each member yields the least back pointer.
        std::vector< std::pair< Member, std::size_t > > produced;
        if ( t == 0 )
        {
            for ( auto s : m.initial_states() )
                if ( m.observation( s ) == observations[ 0 ] )
                    produced.emplace_back( Member{ s, tracker.start( s ) }, 0 );
        }
        else
        {
            const auto& prev = _layers.back();
            for ( std::size_t i = 0; i < prev.size(); ++i )
                for ( auto s : m.successors( prev[ i ].state ) )
                    if ( m.observation( s ) == observations[ t ] )
                        produced.emplace_back( Member{ s, tracker.step( s, prev[ i ].memory ) }, i );
        }
        std::stable_sort( produced.begin(), produced.end(),
                          []( const auto& a, const auto& b ) { return a.first < b.first; } );
        Belief layer;
        std::vector< std::size_t > parent;
        for ( auto& [ mem, p ] : produced )
            if ( layer.empty() || !( layer.back() == mem ) )
            {
                layer.push_back( std::move( mem ) );
                parent.push_back( p );
            }
        _layers.push_back( std::move( layer ) );
        _parent.push_back( std::move( parent ) );
    }
}

Trace ObservationLayers::reconstruct( std::size_t t, std::size_t index ) const
{
    Trace tr;
    tr.steps.resize( t + 1 );
    for ( std::size_t i = t + 1; i-- > 0; )
    {
        tr.steps[ i ] = _layers.at( i ).at( index ).state;
        index = _parent[ i ][ index ];
    }
    return tr;
}

std::optional< std::size_t > ObservationLayers::first_violating( std::size_t t, std::size_t formula ) const
{
    const auto& phi = _tracker->formulas()[ formula ];
    const auto& layer = _layers.at( t );
    for ( std::size_t i = 0; i < layer.size(); ++i )
        if ( !fdi::memory_satisfies( phi, layer[ i ].memory[ formula ] ) )
            return i;
    return std::nullopt;
}

} // namespace mbsa::belief

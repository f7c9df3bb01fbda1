#include "mbsa/fdi_spec.hpp"
#include "mbsa/belief.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <set>

namespace mbsa::fdi
{

PastFormula certainty_formula( const AlarmSpec& spec ) { return PastFormula{ spec.delay.kind, spec.delay.n, spec.beta }; }

Memory memory_before_start( const PastFormula& phi )
{
    return phi.kind == DelayKind::bounded ? Memory{ phi.n } + 1 : 0;
}

Memory memory_step( const PastFormula& phi, Memory mem, bool beta_now )
{
    switch ( phi.kind )
    {
    case DelayKind::exact:
    {
        const Memory mask = ( Memory{ 1 } << ( phi.n + 1 ) ) - 1;
        return ( ( mem << 1 ) | ( beta_now ? 1U : 0U ) ) & mask;
    }
    case DelayKind::bounded: return beta_now ? 0 : std::min< Memory >( mem + 1, Memory{ phi.n } + 1 );
    case DelayKind::finite: return mem | ( beta_now ? 1U : 0U );
    }
    return mem;
}

bool memory_satisfies( const PastFormula& phi, Memory mem )
{
    switch ( phi.kind )
    {
    case DelayKind::exact: return ( mem >> phi.n ) & 1U;
    case DelayKind::bounded: return mem <= phi.n;
    case DelayKind::finite: return mem != 0;
    }
    return false;
}

bool eval_past( const SystemModel& m, const Trace& tr, const PastFormula& phi, std::size_t t )
{
    if ( t >= tr.size() )
        throw SpecError( "time index " + std::to_string( t ) + " outside trace of length " + std::to_string( tr.size() ) );
    auto beta_at = [ & ]( std::size_t i ) { return phi.beta.evaluate( m.valuation( tr.steps[ i ] ) ); };
    switch ( phi.kind )
    {
    case DelayKind::exact: return t >= phi.n && beta_at( t - phi.n );
    case DelayKind::bounded:
    {
        std::size_t lo = t >= phi.n ? t - phi.n : 0;
        for ( std::size_t i = lo; i <= t; ++i )
            if ( beta_at( i ) )
                return true;
        return false;
    }
    case DelayKind::finite:
        for ( std::size_t i = 0; i <= t; ++i )
            if ( beta_at( i ) )
                return true;
        return false;
    }
    return false;
}

std::vector< bool > eval_past_all( const SystemModel& m, const Trace& tr, const PastFormula& phi )
{
    std::vector< bool > out;
    out.reserve( tr.size() );
    Memory mem = memory_before_start( phi );
    for ( auto s : tr.steps )
    {
        mem = memory_step( phi, mem, phi.beta.evaluate( m.valuation( s ) ) );
        out.push_back( memory_satisfies( phi, mem ) );
    }
    return out;
}

namespace
{

void require_trace( const SystemModel& m, const Trace& tr, std::size_t t )
{
    if ( !is_trace_of( m, tr ) )
        throw SpecError( "the given state sequence is not a trace of the model" );
    if ( t >= tr.size() )
        throw SpecError( "time index " + std::to_string( t ) + " outside trace of length " + std::to_string( tr.size() ) );
}

} // namespace

bool eval_knowledge( const SystemModel& m, const Trace& tr, std::size_t t, const PastFormula& phi )
{
    require_trace( m, tr, t );
    belief::Tracker tracker( m, { phi } );
    auto obs = observation_sequence( m, tr );
    belief::ObservationLayers layers( tracker, std::span( obs ).first( t + 1 ) );
    return tracker.certain( layers.layer( t ), 0 );
}

bool eval_knowledge_enumerated( const SystemModel& m, const Trace& tr, std::size_t t, const PastFormula& phi )
{
    require_trace( m, tr, t );
    auto obs = observation_sequence( m, tr );
    Trace path;
    bool all = true;
    // Depth-first over prefixes whose observations match tr's.
    auto dfs = [ & ]( auto&& self, StateId s ) -> void {
        if ( !all )
            return;
        path.steps.push_back( s );
        if ( path.size() == t + 1 )
        {
            if ( !eval_past( m, path, phi, t ) )
                all = false;
        }
        else
            for ( auto n : m.successors( s ) )
                if ( m.observation( n ) == obs[ path.size() ] )
                    self( self, n );
        path.steps.pop_back();
    };
    for ( auto s : m.initial_states() )
        if ( m.observation( s ) == obs[ 0 ] )
            dfs( dfs, s );
    return all;
}

// ---------------------------------------------------------------------------

namespace
{

Formula leaf( Formula::Op op, std::string label )
{
    Formula f;
    f.op = op;
    f.label = std::move( label );
    return f;
}

Formula unary( Formula::Op op, Formula a, unsigned n = 0 )
{
    Formula f;
    f.op = op;
    f.n = n;
    f.args.push_back( std::move( a ) );
    return f;
}

Formula binary( Formula::Op op, Formula a, Formula b )
{
    Formula f;
    f.op = op;
    f.args.push_back( std::move( a ) );
    f.args.push_back( std::move( b ) );
    return f;
}

bool is_identifier( const std::string& s )
{
    if ( s.empty() || std::isdigit( static_cast< unsigned char >( s[ 0 ] ) ) )
        return false;
    return std::all_of( s.begin(), s.end(), []( char c ) {
        return std::isalnum( static_cast< unsigned char >( c ) ) || c == '_' || c == '.';
    } );
}

std::string wrap( const Formula& f )
{
    std::string s = to_string( f );
    bool atomic = f.op == Formula::Op::alarm || ( f.op == Formula::Op::beta && is_identifier( f.label ) ) ||
                  s.front() == '(';
    return atomic || f.args.size() == 1 ? s : "(" + s + ")";
}

} // namespace

std::string to_string( const Formula& f )
{
    using Op = Formula::Op;
    auto n = std::to_string( f.n );
    switch ( f.op )
    {
    case Op::alarm: return f.label;
    case Op::beta: return is_identifier( f.label ) ? f.label : "(" + f.label + ")";
    case Op::implies: return "(" + to_string( f.args[ 0 ] ) + " -> " + to_string( f.args[ 1 ] ) + ")";
    case Op::conj: return "(" + to_string( f.args[ 0 ] ) + " & " + to_string( f.args[ 1 ] ) + ")";
    case Op::globally:
    {
        std::string inner = to_string( f.args[ 0 ] );
        return inner.front() == '(' ? "G" + inner : "G(" + inner + ")";
    }
    case Op::finally: return "F " + wrap( f.args[ 0 ] );
    case Op::finally_within: return "F<=" + n + " " + wrap( f.args[ 0 ] );
    case Op::next: return "X^" + n + " " + wrap( f.args[ 0 ] );
    case Op::yesterday: return "Y^" + n + " " + wrap( f.args[ 0 ] );
    case Op::once: return "O " + wrap( f.args[ 0 ] );
    case Op::once_within: return "O<=" + n + " " + wrap( f.args[ 0 ] );
    case Op::knows: return "K " + wrap( f.args[ 0 ] );
    }
    return {};
}

std::string to_string( Role r )
{
    switch ( r )
    {
    case Role::correctness: return "correctness";
    case Role::completeness: return "completeness";
    case Role::maximality: return "maximality";
    }
    return {};
}

std::string to_string( const PatternFormula& p )
{
    std::string out;
    for ( const auto& c : p.conjuncts )
    {
        if ( !out.empty() )
            out += " & ";
        out += to_string( c.formula );
    }
    return out;
}

PatternFormula instantiate_pattern( const AlarmSpec& spec )
{
    using Op = Formula::Op;
    const Formula alarm = leaf( Op::alarm, spec.alarm );
    const Formula beta = leaf( Op::beta, spec.beta_text );
    const unsigned n = spec.delay.n;

    Formula past;
    std::function< Formula( Formula ) > future;
    switch ( spec.delay.kind )
    {
    case DelayKind::exact:
        past = unary( Op::yesterday, beta, n );
        future = [ n ]( Formula f ) { return unary( Op::next, std::move( f ), n ); };
        break;
    case DelayKind::bounded:
        past = unary( Op::once_within, beta, n );
        future = [ n ]( Formula f ) { return unary( Op::finally_within, std::move( f ), n ); };
        break;
    case DelayKind::finite:
        past = unary( Op::once, beta );
        future = []( Formula f ) { return unary( Op::finally, std::move( f ) ); };
        break;
    }
    const Formula knows = unary( Op::knows, past );

    PatternFormula p;
    p.conjuncts.push_back( { Role::correctness, unary( Op::globally, binary( Op::implies, alarm, past ) ) } );
    Formula served = binary( Op::implies, beta, future( alarm ) );
    if ( spec.diag == DiagScope::global )
        p.conjuncts.push_back( { Role::completeness, unary( Op::globally, served ) } );
    else
    {
        Formula diagnosable = binary( Op::implies, beta, future( knows ) );
        p.conjuncts.push_back( { Role::completeness, unary( Op::globally, binary( Op::implies, diagnosable, served ) ) } );
    }
    if ( spec.maximal )
        p.conjuncts.push_back( { Role::maximality, unary( Op::globally, binary( Op::implies, knows, alarm ) ) } );
    return p;
}

// ---------------------------------------------------------------------------

std::string to_string( Delay d )
{
    switch ( d.kind )
    {
    case DelayKind::exact: return "ExactDel(" + std::to_string( d.n ) + ")";
    case DelayKind::bounded: return "BoundDel(" + std::to_string( d.n ) + ")";
    case DelayKind::finite: return "FiniteDel";
    }
    return {};
}

std::string to_string( DiagScope d ) { return d == DiagScope::global ? "Global" : "Trace"; }

namespace
{

std::string lower( std::string s )
{
    std::transform( s.begin(), s.end(), s.begin(), []( unsigned char c ) { return static_cast< char >( std::tolower( c ) ); } );
    return s;
}

AlarmSpec spec_from_json( const SystemModel& m, const nlohmann::json& j )
{
    if ( !j.is_object() )
        throw SpecError( "each alarm specification must be an object" );
    auto str = [ & ]( const char* key ) {
        auto it = j.find( key );
        if ( it == j.end() || !it->is_string() )
            throw SpecError( std::string( "alarm specification lacks string field '" ) + key + "'" );
        return it->get< std::string >();
    };
    AlarmSpec s;
    s.alarm = str( "alarm" );
    s.beta_text = str( "beta" );
    try
    {
        s.beta = m.parse_expr( s.beta_text );
    }
    catch ( const ExprError& e )
    {
        throw SpecError( "alarm '" + s.alarm + "': " + e.what() );
    }
    auto d = j.find( "delay" );
    if ( d == j.end() || !d->is_object() || !d->contains( "kind" ) || !( *d )[ "kind" ].is_string() )
        throw SpecError( "alarm '" + s.alarm + "': delay must be {kind, n}" );
    std::string kind = lower( ( *d )[ "kind" ].get< std::string >() );
    if ( kind == "exactdel" || kind == "exact" )
        s.delay.kind = DelayKind::exact;
    else if ( kind == "bounddel" || kind == "bounded" || kind == "bound" )
        s.delay.kind = DelayKind::bounded;
    else if ( kind == "finitedel" || kind == "finite" )
        s.delay.kind = DelayKind::finite;
    else
        throw SpecError( "alarm '" + s.alarm + "': unknown delay kind '" + ( *d )[ "kind" ].get< std::string >() + "'" );
    if ( s.delay.kind != DelayKind::finite )
    {
        auto n = d->find( "n" );
        if ( n == d->end() || !n->is_number_integer() || n->get< long long >() < 1 )
            throw SpecError( "alarm '" + s.alarm + "': delay bound n must be a positive integer" );
        if ( n->get< long long >() > 62 )
            throw SpecError( "alarm '" + s.alarm + "': delay bound n is limited to 62 steps" );
        s.delay.n = static_cast< unsigned >( n->get< long long >() );
    }
    std::string diag = j.contains( "diag" ) && j[ "diag" ].is_string() ? lower( j[ "diag" ].get< std::string >() ) : "global";
    if ( diag == "global" )
        s.diag = DiagScope::global;
    else if ( diag == "trace" || diag == "local" )
        s.diag = DiagScope::trace;
    else
        throw SpecError( "alarm '" + s.alarm + "': diag must be Global or Trace" );
    if ( j.contains( "maximal" ) )
    {
        if ( !j[ "maximal" ].is_boolean() )
            throw SpecError( "alarm '" + s.alarm + "': maximal must be a boolean" );
        s.maximal = j[ "maximal" ].get< bool >();
    }
    return s;
}

} // namespace

std::vector< AlarmSpec > parse_specs( const SystemModel& m, std::string_view text )
{
    nlohmann::json j = parse_json_strict( text );
    if ( j.is_object() && j.contains( "alarms" ) )
        j = j[ "alarms" ];
    if ( !j.is_array() )
        throw SpecError( "specification file must be a list of alarm specifications" );
    std::vector< AlarmSpec > out;
    std::set< std::string > names;
    for ( const auto& e : j )
    {
        out.push_back( spec_from_json( m, e ) );
        if ( !names.insert( out.back().alarm ).second )
            throw SpecError( "duplicate alarm name '" + out.back().alarm + "'" );
    }
    return out;
}

std::vector< AlarmSpec > load_specs( const SystemModel& m, const std::filesystem::path& path )
{
    return parse_specs( m, read_text_file( path ) );
}

nlohmann::json spec_to_json( const AlarmSpec& s )
{
    nlohmann::json j;
    j[ "alarm" ] = s.alarm;
    j[ "beta" ] = s.beta_text;
    nlohmann::json d;
    d[ "kind" ] = s.delay.kind == DelayKind::exact ? "ExactDel" : s.delay.kind == DelayKind::bounded ? "BoundDel" : "FiniteDel";
    if ( s.delay.kind != DelayKind::finite )
        d[ "n" ] = s.delay.n;
    j[ "delay" ] = d;
    j[ "diag" ] = to_string( s.diag );
    j[ "maximal" ] = s.maximal;
    return j;
}

} // namespace mbsa::fdi

#include "mbsa/model.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace mbsa
{

ParseError::ParseError( const std::string& what, std::size_t line, std::size_t column )
    : ModelError( "line " + std::to_string( line ) + ", column " + std::to_string( column ) + ": " + what ),
      _line{ line }, _column{ column }
{
}

namespace
{

std::pair< std::size_t, std::size_t > line_column( std::string_view text, std::size_t offset )
{
    offset = std::min( offset, text.size() );
    std::size_t line = 1;
    std::size_t col = 1;
    for ( std::size_t i = 0; i < offset; ++i )
    {
        if ( text[ i ] == '\n' )
        {
            ++line;
            col = 1;
        }
        else
            ++col;
    }
    return { line, col };
}

std::size_t find_index( const std::vector< std::string >& names, std::string_view name, const char* what )
{
    auto it = std::find( names.begin(), names.end(), name );
    if ( it == names.end() )
        throw ModelError( std::string( "unknown " ) + what + " '" + std::string( name ) + "'" );
    return static_cast< std::size_t >( it - names.begin() );
}

} // namespace

nlohmann::json parse_json_strict( std::string_view text )
{
    // Keys seen per open object, plus the key that introduced each object.
    std::vector< std::set< std::string > > open;
    std::vector< std::string > owner;
    std::string last_key;
    std::string duplicate;
    std::string duplicate_owner;

    nlohmann::json::parser_callback_t cb = [ & ]( int, nlohmann::json::parse_event_t ev, nlohmann::json& parsed ) {
        using ev_t = nlohmann::json::parse_event_t;
        switch ( ev )
        {
        case ev_t::object_start:
            open.emplace_back();
            owner.push_back( last_key );
            break;
        case ev_t::object_end:
            if ( !open.empty() )
            {
                open.pop_back();
                owner.pop_back();
            }
            break;
        case ev_t::key:
        {
            last_key = parsed.get< std::string >();
            if ( !open.empty() && !open.back().insert( last_key ).second && duplicate.empty() )
            {
                duplicate = last_key;
                duplicate_owner = owner.back();
            }
            break;
        }
        case ev_t::array_start: last_key.clear(); break;
        default: break;
        }
        return true;
    };

    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse( text.begin(), text.end(), cb );
    }
    catch ( const nlohmann::json::parse_error& e )
    {
        auto [ line, col ] = line_column( text, e.byte == 0 ? 0 : e.byte - 1 );
        std::string msg = e.what();
        auto pos = msg.find( "syntax error" );
        throw ParseError( pos == std::string::npos ? msg : msg.substr( pos ), line, col );
    }
    if ( !duplicate.empty() )
    {
        std::string quoted = "\"" + duplicate + "\"";
        std::size_t first = text.find( quoted );
        std::size_t second = first == std::string_view::npos ? first : text.find( quoted, first + 1 );
        auto [ line, col ] = line_column( text, second == std::string_view::npos ? 0 : second );
        if ( duplicate_owner == "states" )
            throw ParseError( "duplicate state id '" + duplicate + "'", line, col );
        throw ParseError( "duplicate key '" + duplicate + "'", line, col );
    }
    return j;
}

std::string read_text_file( const std::filesystem::path& path )
{
    std::ifstream in( path, std::ios::binary );
    if ( !in )
        throw ModelError( "cannot open '" + path.string() + "'" );
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SystemModel::SystemModel( Parts parts )
    : _atoms{ std::move( parts.atoms ) }, _state_names{ std::move( parts.state_names ) },
      _valuations{ std::move( parts.valuations ) }
{
    {
        std::set< std::string > seen;
        for ( const auto& a : _atoms )
            if ( !seen.insert( a ).second )
                throw ModelError( "duplicate atom '" + a + "'" );
    }
    auto resolve = [ & ]( const std::vector< std::string >& names, const char* what ) {
        std::vector< std::size_t > out;
        for ( const auto& n : names )
        {
            std::size_t idx = find_index( _atoms, n, "atom" );
            if ( std::find( out.begin(), out.end(), idx ) != out.end() )
                throw ModelError( std::string( "atom '" ) + n + "' listed twice in " + what );
            out.push_back( idx );
        }
        return out;
    };
    _faults = resolve( parts.faults, "faults" );
    _observables = resolve( parts.observables, "observables" );
    _modes = resolve( parts.modes, "modes" );
    if ( _faults.size() > 64 )
        throw ModelError( "at most 64 fault atoms are supported" );
    if ( _observables.size() > 64 )
        throw ModelError( "at most 64 observable atoms are supported" );

    std::unordered_map< std::string, StateId > index;
    for ( std::size_t i = 0; i < _state_names.size(); ++i )
        if ( !index.emplace( _state_names[ i ], static_cast< StateId >( i ) ).second )
            throw ModelError( "duplicate state id '" + _state_names[ i ] + "'" );
    if ( _valuations.size() != _state_names.size() )
        throw ModelError( "valuation count does not match state count" );
    for ( auto& v : _valuations )
        v.resize( _atoms.size(), false );

    auto state_of = [ & ]( const std::string& name ) {
        auto it = index.find( name );
        if ( it == index.end() )
            throw ModelError( "unknown state '" + name + "'" );
        return it->second;
    };
    for ( const auto& n : parts.initial )
    {
        StateId s = state_of( n );
        if ( std::find( _initial.begin(), _initial.end(), s ) == _initial.end() )
            _initial.push_back( s );
    }
    std::sort( _initial.begin(), _initial.end() );
    for ( const auto& [ from, to ] : parts.transitions )
        _transitions.emplace_back( state_of( from ), state_of( to ) );
    std::sort( _transitions.begin(), _transitions.end() );
    _transitions.erase( std::unique( _transitions.begin(), _transitions.end() ), _transitions.end() );

    _succ_offset.assign( _state_names.size() + 1, 0 );
    for ( const auto& t : _transitions )
        ++_succ_offset[ t.first + 1 ];
    for ( std::size_t i = 1; i < _succ_offset.size(); ++i )
        _succ_offset[ i ] += _succ_offset[ i - 1 ];
    _succ.reserve( _transitions.size() );
    for ( const auto& t : _transitions )
        _succ.push_back( t.second );

    _observation.resize( _state_names.size() );
    _fault_mask.resize( _state_names.size() );
    for ( std::size_t s = 0; s < _state_names.size(); ++s )
    {
        Observation o = 0;
        for ( std::size_t i = 0; i < _observables.size(); ++i )
            if ( _valuations[ s ][ _observables[ i ] ] )
                o |= Observation{ 1 } << i;
        FaultMask f = 0;
        for ( std::size_t i = 0; i < _faults.size(); ++i )
            if ( _valuations[ s ][ _faults[ i ] ] )
                f |= FaultMask{ 1 } << i;
        _observation[ s ] = o;
        _fault_mask[ s ] = f;
    }
}

StateId SystemModel::state_index( std::string_view name ) const
{
    return static_cast< StateId >( find_index( _state_names, name, "state" ) );
}

std::size_t SystemModel::atom_index( std::string_view name ) const { return find_index( _atoms, name, "atom" ); }

std::span< const StateId > SystemModel::successors( StateId s ) const
{
    if ( s >= state_count() )
        throw ModelError( "unknown state index " + std::to_string( s ) );
    return { _succ.data() + _succ_offset[ s ], _succ.data() + _succ_offset[ s + 1 ] };
}

std::vector< std::string > SystemModel::fault_names( FaultMask mask ) const
{
    std::vector< std::string > out;
    for ( std::size_t i = 0; i < _faults.size(); ++i )
        if ( mask & ( FaultMask{ 1 } << i ) )
            out.push_back( _atoms[ _faults[ i ] ] );
    return out;
}

FaultMask SystemModel::fault_mask_of( std::span< const std::string > names ) const
{
    FaultMask mask = 0;
    for ( const auto& n : names )
    {
        std::size_t atom = atom_index( n );
        auto it = std::find( _faults.begin(), _faults.end(), atom );
        if ( it == _faults.end() )
            throw ModelError( "'" + n + "' is not a fault atom" );
        mask |= FaultMask{ 1 } << ( it - _faults.begin() );
    }
    return mask;
}

nlohmann::json SystemModel::observation_json( Observation o ) const
{
    nlohmann::json j = nlohmann::json::object();
    for ( std::size_t i = 0; i < _observables.size(); ++i )
        j[ _atoms[ _observables[ i ] ] ] = ( ( o >> i ) & 1U ) != 0;
    return j;
}

Observation SystemModel::observation_from_json( const nlohmann::json& j ) const
{
    if ( !j.is_object() )
        throw ModelError( "observation must be an object of atom:bool" );
    Observation o = 0;
    std::size_t matched = 0;
    for ( std::size_t i = 0; i < _observables.size(); ++i )
    {
        const auto& name = _atoms[ _observables[ i ] ];
        auto it = j.find( name );
        if ( it == j.end() )
            throw ModelError( "observation lacks observable '" + name + "'" );
        if ( !it->is_boolean() )
            throw ModelError( "observation value for '" + name + "' is not a boolean" );
        if ( it->get< bool >() )
            o |= Observation{ 1 } << i;
        ++matched;
    }
    if ( matched != j.size() )
        throw ModelError( "observation mentions atoms that are not observable" );
    return o;
}

nlohmann::json SystemModel::to_json() const
{
    auto names = [ & ]( const std::vector< std::size_t >& idx ) {
        nlohmann::json a = nlohmann::json::array();
        for ( auto i : idx )
            a.push_back( _atoms[ i ] );
        return a;
    };
    nlohmann::json j;
    j[ "atoms" ] = _atoms;
    j[ "faults" ] = names( _faults );
    j[ "observables" ] = names( _observables );
    j[ "modes" ] = names( _modes );
    nlohmann::json states = nlohmann::json::object();
    for ( std::size_t s = 0; s < _state_names.size(); ++s )
    {
        nlohmann::json v = nlohmann::json::object();
        for ( std::size_t a = 0; a < _atoms.size(); ++a )
            if ( _valuations[ s ][ a ] )
                v[ _atoms[ a ] ] = true;
        states[ _state_names[ s ] ] = v;
    }
    j[ "states" ] = states;
    nlohmann::json init = nlohmann::json::array();
    for ( auto s : _initial )
        init.push_back( _state_names[ s ] );
    j[ "initial" ] = init;
    nlohmann::json tr = nlohmann::json::array();
    for ( const auto& [ a, b ] : _transitions )
        tr.push_back( { _state_names[ a ], _state_names[ b ] } );
    j[ "transitions" ] = tr;
    return j;
}

SystemModel parse_model( std::string_view text )
{
    nlohmann::json j = parse_json_strict( text );
    if ( !j.is_object() )
        throw ModelError( "model document must be a JSON object" );

    auto string_list = [ & ]( const char* key, bool required ) {
        std::vector< std::string > out;
        auto it = j.find( key );
        if ( it == j.end() )
        {
            if ( required )
                throw ModelError( std::string( "model lacks key '" ) + key + "'" );
            return out;
        }
        if ( !it->is_array() )
            throw ModelError( std::string( "'" ) + key + "' must be a list of names" );
        for ( const auto& e : *it )
        {
            if ( !e.is_string() )
                throw ModelError( std::string( "'" ) + key + "' must be a list of names" );
            out.push_back( e.get< std::string >() );
        }
        return out;
    };

    SystemModel::Parts p;
    p.atoms = string_list( "atoms", true );
    p.faults = string_list( "faults", false );
    p.observables = string_list( "observables", false );
    p.modes = string_list( "modes", false );
    p.initial = string_list( "initial", true );

    auto states = j.find( "states" );
    if ( states == j.end() || !states->is_object() )
        throw ModelError( "model lacks 'states' object" );
    for ( const auto& [ id, val ] : states->items() )
    {
        if ( !val.is_object() )
            throw ModelError( "state '" + id + "' valuation must be an object" );
        std::vector< bool > v( p.atoms.size(), false );
        for ( const auto& [ atom, b ] : val.items() )
        {
            if ( !b.is_boolean() )
                throw ModelError( "state '" + id + "': value of '" + atom + "' is not a boolean" );
            v[ find_index( p.atoms, atom, "atom" ) ] = b.get< bool >();
        }
        p.state_names.push_back( id );
        p.valuations.push_back( std::move( v ) );
    }

    auto trans = j.find( "transitions" );
    if ( trans == j.end() || !trans->is_array() )
        throw ModelError( "model lacks 'transitions' list" );
    for ( const auto& t : *trans )
    {
        if ( !t.is_array() || t.size() != 2 || !t[ 0 ].is_string() || !t[ 1 ].is_string() )
            throw ModelError( "transition entries must be [from, to] pairs of state ids" );
        p.transitions.emplace_back( t[ 0 ].get< std::string >(), t[ 1 ].get< std::string >() );
    }
    return SystemModel{ std::move( p ) };
}

SystemModel load_model( const std::filesystem::path& path ) { return parse_model( read_text_file( path ) ); }

std::string to_string( Violation::Kind kind )
{
    switch ( kind )
    {
    case Violation::Kind::no_initial_state: return "initial-states";
    case Violation::Kind::deadlock: return "deadlock-freedom";
    case Violation::Kind::fault_persistence: return "fault persistence";
    case Violation::Kind::initial_fault: return "initial fault";
    case Violation::Kind::mode_exclusivity: return "mode exclusivity";
    }
    return "unknown";
}

ValidationReport validate_model( const SystemModel& m )
{
    ValidationReport report;
    if ( m.initial_states().empty() )
        report.push_back( { Violation::Kind::no_initial_state, "model has no initial state", {}, {} } );

    for ( StateId s = 0; s < m.state_count(); ++s )
    {
        if ( m.successors( s ).empty() )
            report.push_back( { Violation::Kind::deadlock,
                                "deadlock-freedom: state '" + m.state_name( s ) + "' has no outgoing transition", s, {} } );
        if ( !m.mode_atoms().empty() )
        {
            std::size_t on = 0;
            for ( auto a : m.mode_atoms() )
                on += m.holds( s, a ) ? 1 : 0;
            if ( on != 1 )
                report.push_back( { Violation::Kind::mode_exclusivity,
                                    "mode exclusivity: state '" + m.state_name( s ) + "' has " + std::to_string( on ) +
                                        " mode atoms true",
                                    s, {} } );
        }
    }
    for ( auto s : m.initial_states() )
        if ( m.fault_mask( s ) != 0 )
        {
            auto names = m.fault_names( m.fault_mask( s ) );
            report.push_back( { Violation::Kind::initial_fault,
                                "initial fault: initial state '" + m.state_name( s ) + "' has fault '" + names.front() + "' true",
                                s, {} } );
        }
    for ( const auto& [ a, b ] : m.transitions() )
    {
        FaultMask lost = m.fault_mask( a ) & ~m.fault_mask( b );
        if ( lost != 0 )
        {
            auto names = m.fault_names( lost );
            report.push_back( { Violation::Kind::fault_persistence,
                                "fault persistence: transition " + m.state_name( a ) + " -> " + m.state_name( b ) +
                                    " resets fault '" + names.front() + "'",
                                {}, std::make_pair( a, b ) } );
        }
    }
    return report;
}

std::vector< std::string > successors( const SystemModel& m, std::string_view state )
{
    std::vector< std::string > out;
    for ( auto s : m.successors( m.state_index( state ) ) )
        out.push_back( m.state_name( s ) );
    return out;
}

void for_each_trace( const SystemModel& m, std::size_t horizon,
                     const std::function< void( std::span< const StateId > ) >& visit )
{
    if ( horizon == 0 )
        throw ModelError( "horizon must be positive" );
    std::vector< StateId > path;
    path.reserve( horizon );
    // Explicit DFS with per-depth successor cursors.
    std::vector< std::size_t > cursor;
    cursor.reserve( horizon );
    for ( auto init : m.initial_states() )
    {
        path.assign( 1, init );
        cursor.assign( 1, 0 );
        while ( !path.empty() )
        {
            if ( path.size() == horizon )
            {
                visit( path );
                path.pop_back();
                cursor.pop_back();
                continue;
            }
            auto succ = m.successors( path.back() );
            std::size_t& c = cursor.back();
            if ( c == succ.size() )
            {
                path.pop_back();
                cursor.pop_back();
                continue;
            }
            path.push_back( succ[ c++ ] );
            cursor.push_back( 0 );
        }
    }
}

std::vector< Trace > enumerate_traces( const SystemModel& m, std::size_t horizon )
{
    std::vector< Trace > out;
    for_each_trace( m, horizon, [ & ]( std::span< const StateId > p ) { out.push_back( Trace{ { p.begin(), p.end() } } ); } );
    return out;
}

bool is_trace_of( const SystemModel& m, const Trace& tr )
{
    if ( tr.steps.empty() )
        return false;
    for ( auto s : tr.steps )
        if ( s >= m.state_count() )
            return false;
    auto init = m.initial_states();
    if ( std::find( init.begin(), init.end(), tr.steps.front() ) == init.end() )
        return false;
    for ( std::size_t i = 1; i < tr.steps.size(); ++i )
    {
        auto succ = m.successors( tr.steps[ i - 1 ] );
        if ( !std::binary_search( succ.begin(), succ.end(), tr.steps[ i ] ) )
            return false;
    }
    return true;
}

std::vector< Observation > observation_sequence( const SystemModel& m, const Trace& tr )
{
    std::vector< Observation > out;
    out.reserve( tr.size() );
    for ( auto s : tr.steps )
        out.push_back( m.observation( s ) );
    return out;
}

Trace trace_from_names( const SystemModel& m, std::span< const std::string > names )
{
    Trace tr;
    for ( const auto& n : names )
        tr.steps.push_back( m.state_index( n ) );
    if ( !is_trace_of( m, tr ) )
        throw ModelError( "state sequence is not a trace of the model" );
    return tr;
}

std::vector< std::string > trace_names( const SystemModel& m, const Trace& tr )
{
    std::vector< std::string > out;
    for ( auto s : tr.steps )
        out.push_back( m.state_name( s ) );
    return out;
}

} // namespace mbsa

#include "mbsa/expr.hpp"

#include <algorithm>
#include <cctype>

namespace mbsa
{

struct Expr::Node
{
    Kind kind = Kind::constant;
    bool value = true;
    std::size_t index = 0;
    std::string name;
    std::shared_ptr< const Node > lhs;
    std::shared_ptr< const Node > rhs;
};

Expr::Expr() : Expr( constant( true ) ) {}

Expr::Expr( std::shared_ptr< const Node > node ) : _node{ std::move( node ) } {}

Expr Expr::constant( bool value )
{
    auto n = std::make_shared< Node >();
    n->kind = Kind::constant;
    n->value = value;
    return Expr{ std::move( n ) };
}

Expr Expr::atom( std::size_t index, std::string name )
{
    auto n = std::make_shared< Node >();
    n->kind = Kind::atom;
    n->index = index;
    n->name = std::move( name );
    return Expr{ std::move( n ) };
}

Expr Expr::negation( Expr operand )
{
    auto n = std::make_shared< Node >();
    n->kind = Kind::negation;
    n->lhs = std::move( operand._node );
    return Expr{ std::move( n ) };
}

Expr Expr::conjunction( Expr lhs, Expr rhs )
{
    auto n = std::make_shared< Node >();
    n->kind = Kind::conjunction;
    n->lhs = std::move( lhs._node );
    n->rhs = std::move( rhs._node );
    return Expr{ std::move( n ) };
}

Expr Expr::disjunction( Expr lhs, Expr rhs )
{
    auto n = std::make_shared< Node >();
    n->kind = Kind::disjunction;
    n->lhs = std::move( lhs._node );
    n->rhs = std::move( rhs._node );
    return Expr{ std::move( n ) };
}

Expr::Kind Expr::kind() const { return _node->kind; }

namespace
{

class Parser
{
    std::string_view _text;
    std::span< const std::string > _names;
    std::size_t _pos = 0;

public:
    Parser( std::string_view text, std::span< const std::string > names ) : _text{ text }, _names{ names } {}

    Expr parse_all()
    {
        Expr e = parse_or();
        skip_ws();
        if ( _pos != _text.size() )
            fail( "unexpected character '" + std::string( 1, _text[ _pos ] ) + "'" );
        return e;
    }

private:
    [[noreturn]] void fail( const std::string& what ) const
    {
        throw ExprError( "expression \"" + std::string( _text ) + "\" at position " + std::to_string( _pos ) + ": " + what );
    }

    void skip_ws()
    {
        while ( _pos < _text.size() && std::isspace( static_cast< unsigned char >( _text[ _pos ] ) ) )
            ++_pos;
    }

    bool accept( char c )
    {
        skip_ws();
        if ( _pos < _text.size() && _text[ _pos ] == c )
        {
            ++_pos;
            return true;
        }
        return false;
    }

    Expr parse_or()
    {
        Expr e = parse_and();
        while ( accept( '|' ) )
            e = Expr::disjunction( e, parse_and() );
        return e;
    }

    Expr parse_and()
    {
        Expr e = parse_unary();
        while ( accept( '&' ) )
            e = Expr::conjunction( e, parse_unary() );
        return e;
    }

    Expr parse_unary()
    {
        if ( accept( '!' ) )
            return Expr::negation( parse_unary() );
        if ( accept( '(' ) )
        {
            Expr e = parse_or();
            if ( !accept( ')' ) )
                fail( "expected ')'" );
            return e;
        }
        skip_ws();
        std::size_t start = _pos;
        auto ident_char = [ & ]( char c, bool first ) {
            return std::isalpha( static_cast< unsigned char >( c ) ) || c == '_' ||
                   ( !first && ( std::isdigit( static_cast< unsigned char >( c ) ) || c == '.' ) );
        };
        while ( _pos < _text.size() && ident_char( _text[ _pos ], _pos == start ) )
            ++_pos;
        if ( start == _pos )
            fail( _pos < _text.size() ? "unexpected character '" + std::string( 1, _text[ _pos ] ) + "'"
                                      : "unexpected end of expression" );
        std::string ident( _text.substr( start, _pos - start ) );
        if ( ident == "true" )
            return Expr::constant( true );
        if ( ident == "false" )
            return Expr::constant( false );
        auto it = std::find( _names.begin(), _names.end(), ident );
        if ( it == _names.end() )
        {
            _pos = start;
            fail( "unknown atom '" + ident + "'" );
        }
        return Expr::atom( static_cast< std::size_t >( it - _names.begin() ), ident );
    }
};

} // namespace

Expr Expr::parse( std::string_view text, std::span< const std::string > atom_names )
{
    return Parser{ text, atom_names }.parse_all();
}

namespace
{

template < typename NodeT >
bool eval_node( const NodeT& n, const std::vector< bool >& v )
{
    switch ( n.kind )
    {
    case Expr::Kind::constant: return n.value;
    case Expr::Kind::atom: return n.index < v.size() && v[ n.index ];
    case Expr::Kind::negation: return !eval_node( *n.lhs, v );
    case Expr::Kind::conjunction: return eval_node( *n.lhs, v ) && eval_node( *n.rhs, v );
    case Expr::Kind::disjunction: return eval_node( *n.lhs, v ) || eval_node( *n.rhs, v );
    }
    return false;
}

template < typename NodeT >
std::string render( const NodeT& n )
{
    switch ( n.kind )
    {
    case Expr::Kind::constant: return n.value ? "true" : "false";
    case Expr::Kind::atom: return n.name;
    case Expr::Kind::negation: return "!" + render( *n.lhs );
    case Expr::Kind::conjunction: return "(" + render( *n.lhs ) + " & " + render( *n.rhs ) + ")";
    case Expr::Kind::disjunction: return "(" + render( *n.lhs ) + " | " + render( *n.rhs ) + ")";
    }
    return {};
}

template < typename NodeT >
void collect( const NodeT& n, std::vector< std::size_t >& out )
{
    if ( n.kind == Expr::Kind::atom )
        out.push_back( n.index );
    if ( n.lhs )
        collect( *n.lhs, out );
    if ( n.rhs )
        collect( *n.rhs, out );
}

template < typename NodeT >
bool same( const NodeT* a, const NodeT* b )
{
    if ( a == b )
        return true;
    if ( !a || !b || a->kind != b->kind )
        return false;
    switch ( a->kind )
    {
    case Expr::Kind::constant: return a->value == b->value;
    case Expr::Kind::atom: return a->index == b->index && a->name == b->name;
    default: return same( a->lhs.get(), b->lhs.get() ) && same( a->rhs.get(), b->rhs.get() );
    }
}

} // namespace

bool Expr::evaluate( const std::vector< bool >& valuation ) const { return eval_node( *_node, valuation ); }

std::string Expr::to_string() const { return render( *_node ); }

std::vector< std::size_t > Expr::atoms() const
{
    std::vector< std::size_t > out;
    collect( *_node, out );
    std::sort( out.begin(), out.end() );
    out.erase( std::unique( out.begin(), out.end() ), out.end() );
    return out;
}

bool Expr::is_single_atom( std::size_t* index ) const
{
    if ( _node->kind != Kind::atom )
        return false;
    if ( index )
        *index = _node->index;
    return true;
}

bool operator==( const Expr& a, const Expr& b ) { return same( a._node.get(), b._node.get() ); }

} // namespace mbsa

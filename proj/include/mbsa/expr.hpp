#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mbsa
{

/// Thrown for malformed expression text or references to undeclared atoms.
class ExprError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Boolean expression over indexed atoms. Immutable; copies share structure.
///
/// Grammar (lowest to highest precedence): `a | b`, `a & b`, `!a`, `(a)`,
/// identifiers `[A-Za-z_][A-Za-z0-9_.]*`, and the constants `true`/`false`.
class Expr
{
public:
    enum class Kind { constant, atom, negation, conjunction, disjunction };

    Expr();  // the constant `true`

    static Expr constant( bool value );
    static Expr atom( std::size_t index, std::string name );
    static Expr negation( Expr operand );
    static Expr conjunction( Expr lhs, Expr rhs );
    static Expr disjunction( Expr lhs, Expr rhs );

    /// Parses `text`, resolving identifiers against `atom_names` (index = position).
    static Expr parse( std::string_view text, std::span< const std::string > atom_names );

    [[nodiscard]] Kind kind() const;
    [[nodiscard]] bool evaluate( const std::vector< bool >& valuation ) const;

    /// Fully parenthesized canonical rendering, re-parseable by `parse`.
    [[nodiscard]] std::string to_string() const;

    /// Sorted, de-duplicated atom indices occurring in the expression.
    [[nodiscard]] std::vector< std::size_t > atoms() const;

    /// True when the expression is exactly one atom; `index` receives it.
    [[nodiscard]] bool is_single_atom( std::size_t* index = nullptr ) const;

    friend bool operator==( const Expr& a, const Expr& b );

private:
    struct Node;
    explicit Expr( std::shared_ptr< const Node > node );
    std::shared_ptr< const Node > _node;
};

} // namespace mbsa

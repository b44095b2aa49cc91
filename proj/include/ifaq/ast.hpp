#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ifaq {

enum class UnOpKind { Sqrt, Abs, Ln };
enum class BinOpKind { Eq, Neq, Lt, Le, And, Or, Min, Div };

const char* unOpName(UnOpKind k);
const char* binOpName(BinOpKind k);

// Constants: field literals are first-class values of type Field.
struct Constant {
    enum class Tag { Field, String, Int, Real, Bool } tag;
    std::string text;  // Field / String
    long long i = 0;
    double r = 0.0;
    bool b = false;

    static Constant field(std::string f) { return {Tag::Field, std::move(f)}; }
    static Constant str(std::string s) { return {Tag::String, std::move(s)}; }
    static Constant integer(long long v) { return {Tag::Int, "", v}; }
    static Constant real(double v) { return {Tag::Real, "", 0, v}; }
    static Constant boolean(bool v) { return {Tag::Bool, "", 0, 0.0, v}; }
};

bool operator==(const Constant& a, const Constant& b);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// Immutable expression tree. Add/Mul are stored binary; rewriting and
// comparison go through a flattened n-ary view (see nary.hpp).
struct Expr {
    enum class Kind {
        Add, Mul, Neg, UnOp, BinOp, Const,
        Sum, DictBuild, DictLit, SetLit, Dom, Lookup,
        RecordLit, VariantLit, FieldStatic, FieldDyn,
        Let, Var, If
    };

    Kind kind;
    ExprPtr a, b, c;           // generic child slots
    std::string name;          // Var / binder / field name
    Constant constant{Constant::Tag::Int};
    UnOpKind uop = UnOpKind::Sqrt;
    BinOpKind bop = BinOpKind::Eq;
    std::vector<std::pair<ExprPtr, ExprPtr>> pairs;        // DictLit entries
    std::vector<ExprPtr> items;                            // SetLit elements
    std::vector<std::pair<std::string, ExprPtr>> fields;   // RecordLit fields

    // Set on Lookup nodes introduced by the aggregate optimizer: a missing
    // key evaluates to this expression (additive identity of the payload)
    // instead of raising.
    ExprPtr missingDefault;

    // Source position, 0 when synthesized.
    int line = 0;
    int col = 0;
};

// Constructors.
ExprPtr add(ExprPtr a, ExprPtr b);
ExprPtr sub(ExprPtr a, ExprPtr b);
ExprPtr mul(ExprPtr a, ExprPtr b);
ExprPtr neg(ExprPtr a);
ExprPtr unop(UnOpKind k, ExprPtr a);
ExprPtr binop(BinOpKind k, ExprPtr a, ExprPtr b);
ExprPtr lit(Constant c);
ExprPtr intLit(long long v);
ExprPtr realLit(double v);
ExprPtr boolLit(bool v);
ExprPtr fieldLit(std::string f);
ExprPtr stringLit(std::string s);
ExprPtr sum(std::string var, ExprPtr coll, ExprPtr body);
ExprPtr dictBuild(std::string var, ExprPtr keys, ExprPtr body);
ExprPtr dictLit(std::vector<std::pair<ExprPtr, ExprPtr>> entries);
ExprPtr setLit(std::vector<ExprPtr> elems);
ExprPtr dom(ExprPtr e);
ExprPtr lookup(ExprPtr dict, ExprPtr key);
ExprPtr lookupOrDefault(ExprPtr dict, ExprPtr key, ExprPtr deflt);
ExprPtr recordLit(std::vector<std::pair<std::string, ExprPtr>> fs);
ExprPtr variantLit(std::string field, ExprPtr e);
ExprPtr fieldStatic(ExprPtr e, std::string field);
ExprPtr fieldDyn(ExprPtr e, ExprPtr field);
ExprPtr let(std::string var, ExprPtr bound, ExprPtr body);
ExprPtr var(std::string name);
ExprPtr ifThenElse(ExprPtr cond, ExprPtr then, ExprPtr els);

// Rebuild a node with new children, keeping payload. children() yields the
// direct subexpressions in a fixed order matching rebuild().
std::vector<ExprPtr> children(const ExprPtr& e);
ExprPtr rebuild(const ExprPtr& e, const std::vector<ExprPtr>& kids);

// Top-level program: prelude bindings, optional while loop, result.
struct Program {
    std::vector<std::pair<std::string, ExprPtr>> prelude;
    struct Loop {
        std::string var;
        ExprPtr init;
        ExprPtr cond;
        ExprPtr step;
    };
    std::optional<Loop> loop;
    ExprPtr result;
};

}  // namespace ifaq

"""The study-definition language: parsing, validation, printing, and menus.

A study file declares the classes, the feature vocabulary, the transparent
rule set the mock classifier runs on, and the parameters controlling
observation/prediction generation and the elicitation selection lists.
The grammar is deliberately small and line-friendly::

    study "diabetes-demo" {
      classes { healthy, diabetes }
      feature glucose: numeric(60..300, step 5) unit "mg/dL"
      feature fatigue: boolean
      rule R1 { when glucose > 125 check fatigue == true then diabetes more by 1.0 }
      observations { count 12, demonstrate_each 3, seed 42 }
      predictions { count 6 }
      menu { distractors_per_feature 1, seed 7 }
    }

Parsing is total: malformed input yields positioned issues, never an
exception.  Atoms in a parsed study are already canonicalized.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .rng import PURPOSE_DISTRACTORS, PURPOSE_MENU_SHUFFLE, stream
from .rules import (
    BOOLEAN,
    CATEGORICAL,
    LESS,
    MAX_CLAUSE_ATOMS,
    MORE,
    NUMERIC,
    CanonicalAtom,
    ConstraintRule,
    FeatureDef,
    RawAtom,
    RuleSet,
    atoms_equivalent,
    canonicalize_atom,
    feature_by_name,
    is_contradiction,
    is_tautology,
)

DEFAULT_PREDICTION_COUNT = 5
DEFAULT_DISTRACTORS_PER_FEATURE = 2
MAX_SEED = (1 << 64) - 1

CONDITION_NONE = "none"
CONDITION_FULL = "full"
CONDITION_TARGETED = "targeted"
CONDITIONS = (CONDITION_NONE, CONDITION_FULL, CONDITION_TARGETED)


class MenuExhausted(Exception):
    """A feature's domain cannot supply the requested distractor count."""


class StudyParseError(Exception):
    """Raised by the *_or_raise helpers; carries the positioned issues."""

    def __init__(self, issues: Sequence["ParseIssue"]):
        self.issues = tuple(issues)
        first = issues[0] if issues else None
        detail = f"{first.line}:{first.column} {first.message}" if first else "unknown error"
        super().__init__(f"study does not parse: {detail}")


# ---------------------------------------------------------------------------
# Study model


@dataclass(frozen=True)
class ObservationParams:
    count: int
    demonstrate_each: int
    seed: int


@dataclass(frozen=True)
class PredictionParams:
    count: int


@dataclass(frozen=True)
class MenuParams:
    distractors_per_feature: int
    seed: int


@dataclass(frozen=True)
class Study:
    """A validated study: the physical model plus generation parameters."""

    name: str
    classes: Tuple[str, ...]
    features: Tuple[FeatureDef, ...]
    base: Tuple[float, ...]  # aligned with classes
    truth: RuleSet
    observation_params: ObservationParams
    prediction_params: PredictionParams
    menu_params: MenuParams

    def feature(self, name: str) -> FeatureDef:
        return feature_by_name(self.features, name)

    def base_scores(self) -> Dict[str, float]:
        return dict(zip(self.classes, self.base))

    def fingerprint(self) -> str:
        """Hash of the canonical study text; stable across re-parses."""
        return hashlib.sha256(print_study(self).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ParseIssue:
    line: int
    column: int
    severity: str
    message: str
    code: str = "syntax"


@dataclass(frozen=True)
class ParseResult:
    study: Optional[Study]
    issues: Tuple[ParseIssue, ...] = ()

    @property
    def ok(self) -> bool:
        return self.study is not None


# ---------------------------------------------------------------------------
# Tokenizer

_PUNCT = {"{", "}", "(", ")", ",", ":"}
_TWO_CHAR_OPS = (">=", "<=", "==", "!=", "..")
_ONE_CHAR_OPS = (">", "<", "=")


@dataclass(frozen=True)
class _Token:
    kind: str  # ident | number | string | op | punct | eof
    text: str
    line: int
    col: int
    number: float = 0.0
    is_int: bool = False


def _tokenize(source: str) -> Tuple[List[_Token], List[ParseIssue]]:
    tokens: List[_Token] = []
    issues: List[ParseIssue] = []
    line, col, i = 1, 1, 0
    n = len(source)

    def bump(text: str) -> None:
        nonlocal line, col
        for ch in text:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1

    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            bump(ch)
            i += 1
            continue
        if ch == "#":
            j = source.find("\n", i)
            j = n if j < 0 else j
            bump(source[i:j])
            i = j
            continue
        start_line, start_col = line, col
        if ch == '"':
            j = i + 1
            while j < n and source[j] not in '"\n':
                j += 1
            if j >= n or source[j] != '"':
                issues.append(ParseIssue(start_line, start_col, "error", "unterminated string", "syntax"))
                text = source[i:j]
                tokens.append(_Token("string", source[i + 1 : j], start_line, start_col))
                bump(text)
                i = j
                continue
            tokens.append(_Token("string", source[i + 1 : j], start_line, start_col))
            bump(source[i : j + 1])
            i = j + 1
            continue
        if ch.isdigit() or (ch == "-" and i + 1 < n and source[i + 1].isdigit()):
            j = i + 1 if ch == "-" else i
            while j < n and source[j].isdigit():
                j += 1
            is_int = True
            if j < n and source[j] == "." and not (j + 1 < n and source[j + 1] == "."):
                is_int = False
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            text = source[i:j]
            tokens.append(
                _Token("number", text, start_line, start_col, number=float(text), is_int=is_int)
            )
            bump(text)
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            tokens.append(_Token("ident", text, start_line, start_col))
            bump(text)
            i = j
            continue
        two = source[i : i + 2]
        if two in _TWO_CHAR_OPS:
            tokens.append(_Token("op", two, start_line, start_col))
            bump(two)
            i += 2
            continue
        if ch in _ONE_CHAR_OPS:
            tokens.append(_Token("op", ch, start_line, start_col))
            bump(ch)
            i += 1
            continue
        if ch in _PUNCT:
            tokens.append(_Token("punct", ch, start_line, start_col))
            bump(ch)
            i += 1
            continue
        issues.append(
            ParseIssue(start_line, start_col, "error", f"unexpected character {ch!r}", "syntax")
        )
        bump(ch)
        i += 1
    tokens.append(_Token("eof", "", line, col))
    return tokens, issues


# ---------------------------------------------------------------------------
# Raw parse tree (positions preserved for diagnostics)


@dataclass
class _RawValue:
    kind: str  # "number" | "ident"
    number: float
    ident: str
    line: int
    col: int
    is_int: bool = False


@dataclass
class _RawAtom:
    feature: str
    line: int
    col: int
    op: str
    value: Optional[_RawValue] = None
    values: List[_RawValue] = field(default_factory=list)


@dataclass
class _RawRule:
    id: str
    line: int
    col: int
    when: List[_RawAtom] = field(default_factory=list)
    check: List[_RawAtom] = field(default_factory=list)
    effect_class: str = ""
    class_line: int = 0
    class_col: int = 0
    direction: str = MORE
    weight: float = 0.0
    weight_line: int = 0
    weight_col: int = 0


class _Abort(Exception):
    pass


class _Parser:
    def __init__(self, tokens: List[_Token], issues: List[ParseIssue]):
        self.tokens = tokens
        self.pos = 0
        self.issues = issues

    # -- token plumbing

    def cur(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, tok: _Token, message: str, code: str = "syntax") -> None:
        self.issues.append(ParseIssue(tok.line, tok.col, "error", message, code))

    def fail(self, tok: _Token, message: str) -> None:
        self.error(tok, message)
        raise _Abort()

    def expect_keyword(self, word: str) -> _Token:
        tok = self.cur()
        if tok.kind == "ident" and tok.text == word:
            return self.advance()
        self.fail(tok, f"expected '{word}'")
        raise AssertionError  # unreachable

    def expect_punct(self, text: str) -> _Token:
        tok = self.cur()
        if (tok.kind == "punct" or tok.kind == "op") and tok.text == text:
            return self.advance()
        self.fail(tok, f"expected '{text}'")
        raise AssertionError

    def expect_ident(self, what: str) -> _Token:
        tok = self.cur()
        if tok.kind == "ident":
            return self.advance()
        self.fail(tok, f"expected {what}")
        raise AssertionError

    def expect_number(self, what: str = "a number") -> _Token:
        tok = self.cur()
        if tok.kind == "number":
            return self.advance()
        self.fail(tok, f"expected {what}")
        raise AssertionError

    def expect_string(self, what: str) -> _Token:
        tok = self.cur()
        if tok.kind == "string":
            return self.advance()
        self.fail(tok, f"expected {what}")
        raise AssertionError

    def expect_int(self, what: str) -> Tuple[int, _Token]:
        tok = self.expect_number(what)
        if not tok.is_int:
            self.error(tok, f"expected an integer for {what}", "invalid_number")
        return int(tok.number), tok

    def at_keyword(self, word: str) -> bool:
        tok = self.cur()
        return tok.kind == "ident" and tok.text == word

    # -- grammar

    def parse_study(self) -> dict:
        self.expect_keyword("study")
        name_tok = self.expect_string("the study name")
        self.expect_punct("{")

        raw: dict = {
            "name": name_tok.text,
            "classes": [],
            "features": [],
            "bases": [],
            "rules": [],
            "observations": None,
            "predictions": None,
            "menu": None,
        }

        # classes { a, b, ... }
        classes_tok = self.expect_keyword("classes")
        self.expect_punct("{")
        raw["classes_pos"] = (classes_tok.line, classes_tok.col)
        raw["classes"].append(self.expect_ident("a class name"))
        while self.cur().text == "," and self.cur().kind == "punct":
            self.advance()
            raw["classes"].append(self.expect_ident("a class name"))
        self.expect_punct("}")

        while self.at_keyword("feature"):
            raw["features"].append(self.parse_feature())
        if not raw["features"]:
            self.fail(self.cur(), "expected at least one 'feature' declaration")
        while self.at_keyword("base"):
            raw["bases"].append(self.parse_base())
        while self.at_keyword("rule"):
            raw["rules"].append(self.parse_rule())
        if not raw["rules"]:
            self.error(self.cur(), "study defines no rules", "empty_rule_set")
        raw["observations"] = self.parse_observations()
        if self.at_keyword("predictions"):
            raw["predictions"] = self.parse_predictions()
        if self.at_keyword("menu"):
            raw["menu"] = self.parse_menu()
        self.expect_punct("}")
        tok = self.cur()
        if tok.kind != "eof":
            self.error(tok, "unexpected text after the study block")
        return raw

    def parse_feature(self) -> dict:
        self.expect_keyword("feature")
        name_tok = self.expect_ident("a feature name")
        self.expect_punct(":")
        kind_tok = self.expect_ident("a feature kind (numeric/boolean/categorical)")
        feat: dict = {
            "name": name_tok.text,
            "pos": (name_tok.line, name_tok.col),
            "kind": kind_tok.text,
            "unit": "",
        }
        if kind_tok.text == "numeric":
            self.expect_punct("(")
            lo = self.expect_number("the range minimum")
            self.expect_punct("..")
            hi = self.expect_number("the range maximum")
            self.expect_punct(",")
            self.expect_keyword("step")
            step = self.expect_number("the step size")
            self.expect_punct(")")
            feat.update(minimum=lo.number, maximum=hi.number, step=step.number, kind_pos=(lo.line, lo.col))
        elif kind_tok.text == "boolean":
            pass
        elif kind_tok.text == "categorical":
            self.expect_punct("{")
            values = [self.expect_ident("a category value")]
            while self.cur().kind == "punct" and self.cur().text == ",":
                self.advance()
                values.append(self.expect_ident("a category value"))
            self.expect_punct("}")
            feat["values"] = values
        else:
            self.fail(kind_tok, f"unknown feature kind {kind_tok.text!r}")
        if self.at_keyword("unit"):
            self.advance()
            feat["unit"] = self.expect_string("a unit string").text
        return feat

    def parse_base(self) -> dict:
        self.expect_keyword("base")
        cls_tok = self.expect_ident("a class name")
        self.expect_punct("=")
        num_tok = self.expect_number("a base score")
        return {
            "class": cls_tok.text,
            "pos": (cls_tok.line, cls_tok.col),
            "value": num_tok.number,
        }

    def parse_value(self) -> _RawValue:
        tok = self.cur()
        if tok.kind == "number":
            self.advance()
            return _RawValue("number", tok.number, "", tok.line, tok.col, tok.is_int)
        if tok.kind == "ident":
            self.advance()
            return _RawValue("ident", 0.0, tok.text, tok.line, tok.col)
        self.fail(tok, "expected a value")
        raise AssertionError

    def parse_atom(self) -> _RawAtom:
        feat_tok = self.expect_ident("a feature name")
        tok = self.cur()
        if tok.kind == "ident" and tok.text == "in":
            self.advance()
            self.expect_punct("{")
            values = [self.parse_value()]
            while self.cur().kind == "punct" and self.cur().text == ",":
                self.advance()
                values.append(self.parse_value())
            self.expect_punct("}")
            return _RawAtom(feat_tok.text, feat_tok.line, feat_tok.col, "in", values=values)
        if tok.kind == "op" and tok.text in (">", ">=", "<", "<=", "==", "!="):
            self.advance()
            value = self.parse_value()
            return _RawAtom(feat_tok.text, feat_tok.line, feat_tok.col, tok.text, value=value)
        self.fail(tok, "expected a comparator or 'in'")
        raise AssertionError

    def parse_conj(self) -> List[_RawAtom]:
        atoms = [self.parse_atom()]
        while self.at_keyword("and"):
            self.advance()
            atoms.append(self.parse_atom())
        return atoms

    def parse_rule(self) -> _RawRule:
        self.expect_keyword("rule")
        id_tok = self.expect_ident("a rule id")
        rule = _RawRule(id_tok.text, id_tok.line, id_tok.col)
        self.expect_punct("{")
        self.expect_keyword("when")
        rule.when = self.parse_conj()
        self.expect_keyword("check")
        rule.check = self.parse_conj()
        self.expect_keyword("then")
        cls_tok = self.expect_ident("a class name")
        rule.effect_class = cls_tok.text
        rule.class_line, rule.class_col = cls_tok.line, cls_tok.col
        dir_tok = self.expect_ident("'more' or 'less'")
        if dir_tok.text not in (MORE, LESS):
            self.fail(dir_tok, "expected 'more' or 'less'")
        rule.direction = dir_tok.text
        self.expect_keyword("by")
        w_tok = self.expect_number("a rule weight")
        rule.weight = w_tok.number
        rule.weight_line, rule.weight_col = w_tok.line, w_tok.col
        self.expect_punct("}")
        return rule

    def parse_observations(self) -> dict:
        obs_tok = self.cur()
        self.expect_keyword("observations")
        self.expect_punct("{")
        self.expect_keyword("count")
        count, count_tok = self.expect_int("count")
        self.expect_punct(",")
        self.expect_keyword("demonstrate_each")
        demo, demo_tok = self.expect_int("demonstrate_each")
        self.expect_punct(",")
        self.expect_keyword("seed")
        seed, seed_tok = self.expect_int("seed")
        self.expect_punct("}")
        return {
            "count": count,
            "count_pos": (count_tok.line, count_tok.col),
            "demonstrate_each": demo,
            "demo_pos": (demo_tok.line, demo_tok.col),
            "seed": seed,
            "seed_pos": (seed_tok.line, seed_tok.col),
            "pos": (obs_tok.line, obs_tok.col),
        }

    def parse_predictions(self) -> dict:
        self.expect_keyword("predictions")
        self.expect_punct("{")
        self.expect_keyword("count")
        count, count_tok = self.expect_int("count")
        self.expect_punct("}")
        return {"count": count, "count_pos": (count_tok.line, count_tok.col)}

    def parse_menu(self) -> dict:
        self.expect_keyword("menu")
        self.expect_punct("{")
        self.expect_keyword("distractors_per_feature")
        d, d_tok = self.expect_int("distractors_per_feature")
        self.expect_punct(",")
        self.expect_keyword("seed")
        seed, seed_tok = self.expect_int("seed")
        self.expect_punct("}")
        return {
            "distractors": d,
            "distractors_pos": (d_tok.line, d_tok.col),
            "seed": seed,
            "seed_pos": (seed_tok.line, seed_tok.col),
        }


# ---------------------------------------------------------------------------
# Semantic validation


def _build_study(raw: dict, issues: List[ParseIssue]) -> Optional[Study]:
    def err(pos: Tuple[int, int], message: str, code: str) -> None:
        issues.append(ParseIssue(pos[0], pos[1], "error", message, code))

    classes: List[str] = []
    for c in raw["classes"]:
        if c.text in classes:
            err((c.line, c.col), f"duplicate class {c.text!r}", "duplicate_class")
        else:
            classes.append(c.text)
    if len(classes) < 2:
        err(raw["classes_pos"], "need at least two classes", "too_few_classes")

    features: List[FeatureDef] = []
    feature_names: set = set()
    broken_features: set = set()
    for f in raw["features"]:
        name = f["name"]
        if name in feature_names or name in broken_features:
            err(f["pos"], f"duplicate feature {name!r}", "duplicate_feature")
            continue
        if f["kind"] == "numeric":
            lo, hi, step = f["minimum"], f["maximum"], f["step"]
            bad = False
            if not lo < hi:
                err(f["kind_pos"], f"feature {name!r}: min must be < max", "invalid_feature")
                bad = True
            if not step > 0:
                err(f["kind_pos"], f"feature {name!r}: step must be > 0", "invalid_feature")
                bad = True
            if not bad:
                span = (hi - lo) / step
                if abs(span - round(span)) > 1e-9:
                    err(f["kind_pos"], f"feature {name!r}: range is not divisible by step", "invalid_feature")
                    bad = True
            if bad:
                broken_features.add(name)
                continue
            features.append(FeatureDef(name, NUMERIC, minimum=lo, maximum=hi, step=step, unit=f["unit"]))
        elif f["kind"] == "boolean":
            features.append(FeatureDef(name, BOOLEAN, unit=f["unit"]))
        else:
            values: List[str] = []
            dup = False
            for v in f["values"]:
                if v.text in values:
                    err((v.line, v.col), f"duplicate value {v.text!r} in feature {name!r}", "duplicate_value")
                    dup = True
                else:
                    values.append(v.text)
            if len(values) < 2:
                err(f["pos"], f"feature {name!r}: categorical needs >= 2 distinct values", "invalid_feature")
                broken_features.add(name)
                continue
            if dup:
                broken_features.add(name)
                continue
            features.append(FeatureDef(name, CATEGORICAL, values=tuple(values), unit=f["unit"]))
        feature_names.add(name)

    base = {c: 0.0 for c in classes}
    seen_base: set = set()
    for b in raw["bases"]:
        if b["class"] not in classes:
            err(b["pos"], f"undeclared class {b['class']!r}", "undeclared_class")
            continue
        if b["class"] in seen_base:
            err(b["pos"], f"duplicate base for class {b['class']!r}", "duplicate_base")
            continue
        seen_base.add(b["class"])
        base[b["class"]] = b["value"]

    feature_map = {f.name: f for f in features}
    rules: List[ConstraintRule] = []
    rule_ids: set = set()
    for r in raw["rules"]:
        ok = True
        if r.id in rule_ids:
            err((r.line, r.col), f"duplicate rule id {r.id!r}", "duplicate_rule_id")
            ok = False
        rule_ids.add(r.id)
        clauses = []
        for role, atoms in (("when", r.when), ("check", r.check)):
            if len(atoms) > MAX_CLAUSE_ATOMS:
                extra = atoms[MAX_CLAUSE_ATOMS]
                err((extra.line, extra.col), f"at most {MAX_CLAUSE_ATOMS} atoms per clause", "too_many_atoms")
                ok = False
            canonical: List[CanonicalAtom] = []
            for a in atoms:
                atom = _check_atom(a, feature_map, broken_features, err)
                if atom is None:
                    ok = False
                else:
                    canonical.append(atom)
            clauses.append(tuple(canonical))
        if r.effect_class not in classes:
            err((r.class_line, r.class_col), f"undeclared class {r.effect_class!r}", "undeclared_class")
            ok = False
        if not r.weight > 0:
            err((r.weight_line, r.weight_col), "rule weight must be > 0", "invalid_weight")
            ok = False
        if ok:
            rules.append(
                ConstraintRule(
                    id=r.id,
                    relevance=clauses[0],
                    satisfaction=clauses[1],
                    effect_class=r.effect_class,
                    direction=r.direction,
                    weight=r.weight,
                )
            )

    obs = raw["observations"]
    if obs["count"] < 1:
        err(obs["count_pos"], "observation count must be >= 1", "invalid_params")
    if obs["demonstrate_each"] < 0:
        err(obs["demo_pos"], "demonstrate_each must be >= 0", "invalid_params")
    if not 0 <= obs["seed"] <= MAX_SEED:
        err(obs["seed_pos"], "seed must fit in 64 unsigned bits", "invalid_params")

    preds = raw["predictions"]
    pred_count = preds["count"] if preds else DEFAULT_PREDICTION_COUNT
    if preds and preds["count"] < 1:
        err(preds["count_pos"], "prediction count must be >= 1", "invalid_params")

    menu = raw["menu"]
    distractors = menu["distractors"] if menu else DEFAULT_DISTRACTORS_PER_FEATURE
    menu_seed = menu["seed"] if menu else obs["seed"]
    if menu:
        if menu["distractors"] < 0:
            err(menu["distractors_pos"], "distractors_per_feature must be >= 0", "invalid_params")
        if not 0 <= menu["seed"] <= MAX_SEED:
            err(menu["seed_pos"], "seed must fit in 64 unsigned bits", "invalid_params")

    if any(i.severity == "error" for i in issues):
        return None
    return Study(
        name=raw["name"],
        classes=tuple(classes),
        features=tuple(features),
        base=tuple(base[c] for c in classes),
        truth=RuleSet(tuple(rules)),
        observation_params=ObservationParams(obs["count"], obs["demonstrate_each"], obs["seed"]),
        prediction_params=PredictionParams(pred_count),
        menu_params=MenuParams(distractors, menu_seed),
    )


def _check_atom(a: _RawAtom, feature_map, broken_features, err) -> Optional[CanonicalAtom]:
    if a.feature in broken_features:
        return None  # already reported at the declaration site
    feature = feature_map.get(a.feature)
    if feature is None:
        err((a.line, a.col), f"unknown feature {a.feature!r}", "unknown_feature")
        return None
    if a.op == "in":
        if feature.kind != CATEGORICAL:
            err((a.line, a.col), f"'in' is only legal for categorical features", "illegal_comparator")
            return None
        values: List[str] = []
        for v in a.values:
            if v.kind != "ident":
                err((v.line, v.col), f"expected a category value for {feature.name!r}", "invalid_value")
                return None
            if v.ident not in feature.values:
                err((v.line, v.col), f"unknown value {v.ident!r} for feature {feature.name!r}", "invalid_value")
                return None
            if v.ident not in values:
                values.append(v.ident)
        raw_atom = RawAtom(a.feature, "in", values=tuple(values))
    else:
        v = a.value
        assert v is not None
        if feature.kind == NUMERIC:
            if v.kind != "number":
                err((v.line, v.col), f"expected a number for feature {feature.name!r}", "invalid_value")
                return None
            raw_atom = RawAtom(a.feature, a.op, value=v.number)
        elif feature.kind == BOOLEAN:
            if a.op not in ("==", "!="):
                err((a.line, a.col), f"comparator {a.op!r} is not legal for boolean feature {feature.name!r}", "illegal_comparator")
                return None
            if v.kind != "ident" or v.ident not in ("true", "false"):
                err((v.line, v.col), f"expected true/false for feature {feature.name!r}", "invalid_value")
                return None
            raw_atom = RawAtom(a.feature, a.op, value=(v.ident == "true"))
        else:
            if a.op not in ("==", "!="):
                err((a.line, a.col), f"comparator {a.op!r} is not legal for categorical feature {feature.name!r}", "illegal_comparator")
                return None
            if v.kind != "ident" or v.ident not in feature.values:
                err((v.line, v.col), f"unknown value for feature {feature.name!r}", "invalid_value")
                return None
            raw_atom = RawAtom(a.feature, a.op, value=v.ident)
    return canonicalize_atom(raw_atom, feature)


def parse_study(source: str) -> ParseResult:
    """Parse and validate study text.  Total: bad input yields issues only."""
    tokens, issues = _tokenize(source)
    parser = _Parser(tokens, issues)
    study: Optional[Study] = None
    try:
        raw = parser.parse_study()
    except _Abort:
        raw = None
    if raw is not None:
        study = _build_study(raw, issues)
    if any(i.severity == "error" for i in issues):
        study = None
    deduped: List[ParseIssue] = []
    seen = set()
    for issue in issues:
        key = (issue.line, issue.column, issue.code)
        if key not in seen:
            seen.add(key)
            deduped.append(issue)
    return ParseResult(study=study, issues=tuple(deduped))


def parse_study_or_raise(source: str) -> Study:
    result = parse_study(source)
    if result.study is None:
        raise StudyParseError(result.issues)
    return result.study


def load_study(path: str) -> Study:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_study_or_raise(fh.read())


# ---------------------------------------------------------------------------
# Printing (canonical text; parse(print(study)) == study)


def format_number(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _value_text(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return format_number(float(value))
    return str(value)


def atom_text(atom: CanonicalAtom) -> str:
    if atom.op == "in":
        inner = ", ".join(_value_text(v) for v in atom.values)
        return f"{atom.feature} in {{ {inner} }}"
    return f"{atom.feature} {atom.op} {_value_text(atom.value)}"


def _feature_text(f: FeatureDef) -> str:
    if f.kind == NUMERIC:
        core = f"feature {f.name}: numeric({format_number(f.minimum)}..{format_number(f.maximum)}, step {format_number(f.step)})"
    elif f.kind == BOOLEAN:
        core = f"feature {f.name}: boolean"
    else:
        core = f"feature {f.name}: categorical {{ {', '.join(f.values)} }}"
    if f.unit:
        core += f' unit "{f.unit}"'
    return core


def print_study(study: Study) -> str:
    """Render a Study back to canonical DSL text (atoms in canonical form)."""
    lines = [f'study "{study.name}" {{']
    lines.append(f"  classes {{ {', '.join(study.classes)} }}")
    for f in study.features:
        lines.append(f"  {_feature_text(f)}")
    for cls, score in zip(study.classes, study.base):
        if score != 0.0:
            lines.append(f"  base {cls} = {format_number(score)}")
    for rule in study.truth:
        when = " and ".join(atom_text(a) for a in rule.relevance)
        check = " and ".join(atom_text(a) for a in rule.satisfaction)
        lines.append(
            f"  rule {rule.id} {{ when {when} check {check} "
            f"then {rule.effect_class} {rule.direction} by {format_number(rule.weight)} }}"
        )
    o = study.observation_params
    lines.append(
        f"  observations {{ count {o.count}, demonstrate_each {o.demonstrate_each}, seed {o.seed} }}"
    )
    lines.append(f"  predictions {{ count {study.prediction_params.count} }}")
    m = study.menu_params
    lines.append(f"  menu {{ distractors_per_feature {m.distractors_per_feature}, seed {m.seed} }}")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Selection-list menus


@dataclass(frozen=True)
class ClauseMenu:
    """The elicitation vocabulary: atoms plus (class, direction) choices.

    The same atom pool backs the relevance and satisfaction selection lists;
    truth atoms and distractors are shuffled together so list position leaks
    nothing about ground truth.
    """

    atoms: Tuple[CanonicalAtom, ...]
    classifications: Tuple[Tuple[str, str], ...]
    warnings: Tuple[str, ...] = ()

    @property
    def relevance_atoms(self) -> Tuple[CanonicalAtom, ...]:
        return self.atoms

    @property
    def satisfaction_atoms(self) -> Tuple[CanonicalAtom, ...]:
        return self.atoms


def _distractor_candidates(feature: FeatureDef) -> List[CanonicalAtom]:
    """All non-trivial canonical atoms a distractor may be drawn from.

    Numeric candidates are the threshold forms (the shape rules are written
    in); tautologies and contradictions are excluded so every menu entry is
    informative.  Categorical enumeration is capped to keep 2^k in check.
    """
    if feature.kind == NUMERIC:
        grid = feature.domain
        out: List[CanonicalAtom] = []
        for t in grid[1:]:
            out.append(CanonicalAtom(feature.name, ">=", t))
        for t in grid[1:]:
            out.append(CanonicalAtom(feature.name, "<", t))
        return out
    if feature.kind == BOOLEAN:
        return [CanonicalAtom(feature.name, "==", True), CanonicalAtom(feature.name, "==", False)]
    values = feature.domain
    k = len(values)
    if k > 16:  # avoid 2^k blowups; singles and complements still offered
        out = [CanonicalAtom(feature.name, "in", values=(v,)) for v in values]
        for v in values:
            rest = tuple(w for w in values if w != v)
            out.append(CanonicalAtom(feature.name, "in", values=rest))
        return out
    out = []
    for mask in range(1, (1 << k) - 1):
        subset = tuple(values[i] for i in range(k) if mask & (1 << i))
        out.append(CanonicalAtom(feature.name, "in", values=subset))
    return out


def truth_atoms(study: Study) -> List[CanonicalAtom]:
    """Ground-truth atoms across all rules, deduplicated by equivalence."""
    out: List[CanonicalAtom] = []
    for rule in study.truth:
        for atom in rule.atoms():
            if not any(atoms_equivalent(atom, kept, study.features) for kept in out):
                out.append(atom)
    return out


def build_menu(study: Study, seed: Optional[int] = None, strict: bool = False) -> ClauseMenu:
    """Build the selection lists: truth atoms plus seeded distractors.

    A feature whose atom space cannot supply the requested distractor count
    is clamped with a warning; pass ``strict=True`` to get MenuExhausted
    instead.  Deterministic for a given (study, seed).
    """
    if seed is None:
        seed = study.menu_params.seed
    want = study.menu_params.distractors_per_feature
    truths = truth_atoms(study)
    warnings: List[str] = []
    distractors: List[CanonicalAtom] = []
    for index, feature in enumerate(study.features):
        candidates = [
            c
            for c in _distractor_candidates(feature)
            if not any(a.feature == feature.name and a == c for a in truths)
        ]
        rng = stream(seed, PURPOSE_DISTRACTORS, salt=index + 1)
        rng.shuffle(candidates)
        if len(candidates) < want:
            message = (
                f"feature {feature.name!r} can only supply {len(candidates)} "
                f"of {want} requested distractors"
            )
            if strict:
                raise MenuExhausted(message)
            warnings.append(message)
        distractors.extend(candidates[:want])
    atoms = truths + distractors
    stream(seed, PURPOSE_MENU_SHUFFLE).shuffle(atoms)
    classifications = tuple((c, d) for c in study.classes for d in (MORE, LESS))
    return ClauseMenu(atoms=tuple(atoms), classifications=classifications, warnings=tuple(warnings))


def menu_contains(menu: ClauseMenu, atom: CanonicalAtom, features: Sequence[FeatureDef]) -> bool:
    return any(atoms_equivalent(atom, m, features) for m in menu.atoms)


# ---------------------------------------------------------------------------
# Explanation text


def atom_phrase(atom: CanonicalAtom, features: Sequence[FeatureDef]) -> str:
    """Human-readable phrase for one atom, with units for numeric features."""
    feature = feature_by_name(features, atom.feature)
    if feature.kind == BOOLEAN:
        return f"{atom.feature} is present" if atom.value else f"{atom.feature} is absent"
    if feature.kind == CATEGORICAL:
        values = atom.values
        if len(values) == 1:
            return f"{atom.feature} is {values[0]}"
        return f"{atom.feature} is one of {', '.join(str(v) for v in values)}"
    symbol = {">=": "≥", "<": "<", "==": "=", "!=": "≠"}[atom.op]
    text = f"{atom.feature} {symbol} {format_number(float(atom.value))}"  # type: ignore[arg-type]
    if feature.unit:
        text += f" {feature.unit}"
    return text


def render_rule_text(rule: ConstraintRule, features: Sequence[FeatureDef]) -> str:
    """Fill the fixed explanation template for one rule."""
    when = " AND ".join(atom_phrase(a, features) for a in rule.relevance)
    check = " AND ".join(atom_phrase(a, features) for a in rule.satisfaction)
    how = "MORE" if rule.direction == MORE else "LESS"
    return (
        f"IF {when}, THE AI CHECKS {check}; "
        f"IF MET, '{rule.effect_class}' BECOMES {how} LIKELY (strength {rule.weight!r})."
    )

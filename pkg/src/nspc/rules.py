"""Symbolic rules derived from gate-passing probes, and the inference-time guard.

A rule is a single condition over one (AST type, position range) cell.
Presence mode fires when a token of the rule's type appears in the range;
attribution mode additionally requires that token's phi to clear the
probe's boundary threshold.  Rules below the accuracy gate become
report-only low-reliability markers.

The guard consults rules only when the model's confidence falls below tau,
taking the highest-confidence firing rule's target class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .attribution import ShapVector
from .errors import DataError, MissingAttribution
from .lexing import AlignedToken, AstTag, ClassLabel
from .predictor import Predictor, confidence, full_mask
from .probing import PositionRange, ProbeGrid, grid_records

GATE_DEFAULT = 0.6
TAU_DEFAULT = 0.6


@dataclass(frozen=True)
class PhiCondition:
    comparator: str  # ">=" | "<="
    threshold: float

    def __post_init__(self):
        if self.comparator not in (">=", "<="):
            raise DataError(f"bad comparator {self.comparator!r}")

    def holds(self, phi: float) -> bool:
        return phi >= self.threshold if self.comparator == ">=" else phi <= self.threshold


@dataclass(frozen=True)
class SymbolicRule:
    tag: AstTag
    range: PositionRange
    mode: str  # "presence" | "attribution"
    phi_condition: Optional[PhiCondition]
    target_class: ClassLabel
    confidence: float
    part: str  # "positive-correlation" | "low-reliability"

    def __post_init__(self):
        if self.mode == "attribution" and self.phi_condition is None:
            raise DataError("attribution mode requires a phi condition")
        if self.mode == "presence" and self.phi_condition is not None:
            raise DataError("presence mode must not carry a phi condition")
        if self.part == "positive-correlation" and not self.confidence > GATE_DEFAULT:
            raise DataError(
                f"positive-correlation rule needs confidence > {GATE_DEFAULT}, "
                f"got {self.confidence}"
            )

    @property
    def rule_id(self) -> str:
        return (f"{self.tag.value}[{self.range.label}]:{self.mode}"
                f"->{self.target_class.value}:{self.part}")

    def to_json_obj(self) -> dict:
        return {
            "tag": self.tag.value,
            "range": {"lo": self.range.lo, "hi": self.range.hi},
            "mode": self.mode,
            "phiCondition": (
                None if self.phi_condition is None else
                {"comparator": self.phi_condition.comparator,
                 "threshold": self.phi_condition.threshold}
            ),
            "targetClass": self.target_class.value,
            "confidence": self.confidence,
            "part": self.part,
        }

    @classmethod
    def from_json_obj(cls, d: dict) -> "SymbolicRule":
        cond = d.get("phiCondition")
        return cls(
            tag=AstTag(d["tag"]),
            range=PositionRange(d["range"]["lo"], d["range"]["hi"]),
            mode=d["mode"],
            phi_condition=None if cond is None else PhiCondition(
                cond["comparator"], cond["threshold"]),
            target_class=ClassLabel(d["targetClass"]),
            confidence=d["confidence"],
            part=d["part"],
        )


def _rule_sort_key(rule: SymbolicRule):
    # descending confidence, ties by (tag, lo) lexicographic
    return (-rule.confidence, rule.tag.value, rule.range.lo, rule.mode)


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[SymbolicRule, ...]
    provenance: dict

    def __post_init__(self):
        seen = set()
        for rule in self.rules:
            key = (rule.tag, rule.range, rule.mode, rule.target_class)
            if key in seen:
                raise DataError(f"duplicate rule {rule.rule_id}")
            seen.add(key)
        ordered = tuple(sorted(self.rules, key=_rule_sort_key))
        if ordered != self.rules:
            raise DataError("rules must be ordered by descending confidence")

    def positive_rules(self) -> list[SymbolicRule]:
        return [r for r in self.rules if r.part == "positive-correlation"]


def derive_rules_from_records(records: list[dict], gate: float = GATE_DEFAULT,
                              provenance: Optional[dict] = None) -> RuleSet:
    """One presence + one attribution rule per gate-passing cell, aimed at the
    majority class on the boundary side holding most of the cell's samples;
    fitted cells below the gate become low-reliability markers."""
    rules = []
    for rec in records:
        if rec["status"] != "ok":
            continue
        tag = AstTag(rec["tag"])
        rng = PositionRange(rec["lo"], rec["hi"])
        passing = rec["test_acc"] > gate and rec["boundary_phi"] is not None
        if passing:
            sc = rec["side_counts"]
            ge_total = sc["ge_secure"] + sc["ge_insecure"]
            lt_total = sc["lt_secure"] + sc["lt_insecure"]
            if ge_total >= lt_total:
                comparator = ">="
                target = (ClassLabel.INSECURE if sc["ge_insecure"] >= sc["ge_secure"]
                          else ClassLabel.SECURE)
            else:
                comparator = "<="
                target = (ClassLabel.INSECURE if sc["lt_insecure"] >= sc["lt_secure"]
                          else ClassLabel.SECURE)
            common = dict(tag=tag, range=rng, target_class=target,
                          confidence=rec["test_acc"], part="positive-correlation")
            rules.append(SymbolicRule(mode="presence", phi_condition=None, **common))
            rules.append(SymbolicRule(
                mode="attribution",
                phi_condition=PhiCondition(comparator, rec["boundary_phi"]),
                **common,
            ))
        else:
            n_secure, n_insecure = rec["class_counts"]
            target = ClassLabel.INSECURE if n_insecure >= n_secure else ClassLabel.SECURE
            rules.append(SymbolicRule(
                tag=tag, range=rng, mode="presence", phi_condition=None,
                target_class=target, confidence=rec["test_acc"],
                part="low-reliability",
            ))
    return RuleSet(
        rules=tuple(sorted(rules, key=_rule_sort_key)),
        provenance=provenance or {},
    )


def derive_rules(grid: ProbeGrid, tags: list[AstTag], ranges: list[PositionRange],
                 gate: float = GATE_DEFAULT, provenance: Optional[dict] = None) -> RuleSet:
    return derive_rules_from_records(grid_records(grid, tags, ranges), gate, provenance)


def rule_fires(rule: SymbolicRule, tokens: list[AlignedToken],
               shap: Optional[ShapVector] = None) -> bool:
    if rule.mode == "attribution" and shap is None:
        raise MissingAttribution(f"rule {rule.rule_id} needs attribution values")
    for tok in tokens:
        if tok.tag != rule.tag or tok.position not in rule.range:
            continue
        if rule.mode == "presence":
            return True
        if rule.phi_condition.holds(shap.phis[tok.position]):
            return True
    return False


@dataclass(frozen=True)
class GuardedPrediction:
    final_class: ClassLabel
    model_class: ClassLabel
    model_confidence: float
    p_positive: float
    decided_by: str  # "model" | "rule"
    fired_rules: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "final_class": self.final_class.value,
            "model_class": self.model_class.value,
            "model_confidence": self.model_confidence,
            "p_positive": self.p_positive,
            "decided_by": self.decided_by,
            "fired_rules": list(self.fired_rules),
        }


def guard_predict(tokens: list[AlignedToken], predictor: Predictor,
                  rule_set: RuleSet, tau: float = TAU_DEFAULT,
                  shap: Optional[ShapVector] = None) -> GuardedPrediction:
    """Defer to rules only below the confidence threshold; model decides otherwise.

    Attribution-mode rules are skipped when no attribution vector is supplied
    (presence mode is the serving-time default)."""
    lexemes = [t.lexeme for t in tokens]
    p = predictor.predict(lexemes, full_mask(len(lexemes)))
    model_class = ClassLabel.INSECURE if p >= 0.5 else ClassLabel.SECURE
    conf = confidence(p)
    if conf >= tau:
        return GuardedPrediction(model_class, model_class, conf, p, "model", ())
    fired = []
    decided: Optional[ClassLabel] = None
    for rule in rule_set.positive_rules():
        if rule.mode == "attribution" and shap is None:
            continue
        if rule_fires(rule, tokens, shap):
            fired.append(rule.rule_id)
            if decided is None:
                decided = rule.target_class
    if decided is None:
        return GuardedPrediction(model_class, model_class, conf, p, "model", tuple(fired))
    return GuardedPrediction(decided, model_class, conf, p, "rule", tuple(fired))


# ---------------------------------------------------------------------------
# rule file I/O

def ruleset_to_json(rule_set: RuleSet) -> str:
    objs = [{"provenance": rule_set.provenance}]
    objs.extend(r.to_json_obj() for r in rule_set.rules)
    return json.dumps(objs, sort_keys=True, indent=1) + "\n"


def ruleset_from_json(text: str) -> RuleSet:
    objs = json.loads(text)
    if not objs or "provenance" not in objs[0]:
        raise DataError("rule file must start with a provenance header object")
    rules = tuple(SymbolicRule.from_json_obj(o) for o in objs[1:])
    return RuleSet(rules=rules, provenance=objs[0]["provenance"])


def save_ruleset(rule_set: RuleSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(ruleset_to_json(rule_set))


def load_ruleset(path) -> RuleSet:
    with open(path, encoding="utf-8") as fh:
        return ruleset_from_json(fh.read())

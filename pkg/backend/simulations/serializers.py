"""
DRF serializers for the JSON problem configuration.

Validation is split between field-level rules (types, ranges, choices) and
the domain constructors, whose admissibility messages are surfaced under the
section they belong to. ``ProblemSpecSerializer(spec).data`` is the dump
format and parses back to an equal spec.
"""

from __future__ import annotations

from rest_framework import serializers

from grid.services import Grid
from integrator.config import LINEAR_SOLVERS, MEMORY_MODES, NumericsConfig
from memory.kernels import KernelPair, PronyKernel, check_admissible
from model.services import Coupling, Material, admissible_p, exponent_bound_message
from viscowave.exceptions import AdmissibilityError, DomainError

from .specs import (
    CertificationConfig,
    InitialData,
    Mode,
    OutputConfig,
    ProblemSpec,
)


class StrictSerializer(serializers.Serializer):
    """Rejects keys that are not declared fields."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError(
                    {key: ["unknown key"] for key in unknown}
                )
        return super().to_internal_value(data)


class DomainSerializer(StrictSerializer):
    dim = serializers.IntegerField(min_value=1, max_value=2)
    lengths = serializers.ListField(
        child=serializers.FloatField(), min_length=1, max_length=2
    )
    n_cells = serializers.ListField(
        child=serializers.IntegerField(), min_length=1, max_length=2
    )

    def validate(self, attrs):
        try:
            Grid(attrs["dim"], tuple(attrs["lengths"]), tuple(attrs["n_cells"]))
        except DomainError as exc:
            raise serializers.ValidationError(str(exc))
        return attrs

    def to_representation(self, instance: Grid):
        return {
            "dim": instance.dim,
            "lengths": list(instance.lengths),
            "n_cells": list(instance.n_cells),
        }


class MaterialSerializer(StrictSerializer):
    m0 = serializers.FloatField()
    m1 = serializers.FloatField(default=0.0)
    gamma = serializers.FloatField(default=1.0)

    def validate_m0(self, value):
        if not value > 0:
            raise serializers.ValidationError(
                "m0 must be positive: the stiffness M(s) = m0 + m1*s^gamma "
                "needs m0 > 0, m1 >= 0, gamma >= 1"
            )
        return value

    def validate_m1(self, value):
        if not value >= 0:
            raise serializers.ValidationError("m1 must be nonnegative")
        return value

    def validate_gamma(self, value):
        if not value >= 1:
            raise serializers.ValidationError("gamma must be at least 1")
        return value


class KernelTermSerializer(StrictSerializer):
    a = serializers.FloatField()
    b = serializers.FloatField()

    def validate_a(self, value):
        if not value >= 0:
            raise serializers.ValidationError("kernel weights must be nonnegative")
        return value

    def validate_b(self, value):
        if not value > 0:
            raise serializers.ValidationError("kernel rates must be positive")
        return value


class KernelsSerializer(StrictSerializer):
    g1 = KernelTermSerializer(many=True, required=False)
    g2 = KernelTermSerializer(many=True, required=False)

    def to_representation(self, instance: KernelPair):
        return {
            name: [{"a": term.a, "b": term.b} for term in kernel]
            for name, kernel in (("g1", instance.g1), ("g2", instance.g2))
        }


class CouplingSerializer(StrictSerializer):
    a = serializers.FloatField(min_value=0.0, default=1.0)
    b = serializers.FloatField(min_value=0.0, default=1.0)
    p = serializers.FloatField(default=1.0)

    def to_representation(self, instance: Coupling):
        return {"a": instance.a, "b": instance.b, "p": instance.p}


class ModeSerializer(StrictSerializer):
    index = serializers.ListField(
        child=serializers.IntegerField(min_value=1), min_length=1, max_length=2
    )
    amplitude = serializers.FloatField()

    def to_representation(self, instance: Mode):
        return {"index": list(instance.index), "amplitude": instance.amplitude}


class InitialSerializer(StrictSerializer):
    u0_modes = ModeSerializer(many=True, required=False)
    u1_modes = ModeSerializer(many=True, required=False)
    v0_modes = ModeSerializer(many=True, required=False)
    v1_modes = ModeSerializer(many=True, required=False)


class NumericsSerializer(StrictSerializer):
    dt = serializers.FloatField()
    t_end = serializers.FloatField(min_value=0.0)
    memory_mode = serializers.ChoiceField(choices=MEMORY_MODES, default="auto")
    linear_solver = serializers.ChoiceField(choices=LINEAR_SOLVERS, default="auto")
    cg_tolerance = serializers.FloatField(required=False)
    cg_max_iterations = serializers.IntegerField(min_value=1, required=False)
    divergence_threshold = serializers.FloatField(required=False)
    cfl_safety = serializers.FloatField(required=False)

    def validate(self, attrs):
        try:
            NumericsConfig(**attrs)
        except DomainError as exc:
            raise serializers.ValidationError(str(exc))
        return attrs


class OutputsSerializer(StrictSerializer):
    series_path = serializers.CharField(default="series.csv")
    report_path = serializers.CharField(default="report.json")
    stride = serializers.IntegerField(min_value=1, default=1)
    metrics_path = serializers.CharField(allow_null=True, required=False, default=None)


class CertificationSerializer(StrictSerializer):
    enabled = serializers.BooleanField(default=True)
    eta_budget = serializers.IntegerField(min_value=1, default=64)
    eta_refinement_steps = serializers.IntegerField(min_value=0, default=200)
    eta_modes = serializers.IntegerField(min_value=1, default=8)
    eta_audit_samples = serializers.IntegerField(min_value=0, default=0)


class ProblemSpecSerializer(StrictSerializer):
    domain = DomainSerializer()
    material = MaterialSerializer()
    kernels = KernelsSerializer(required=False)
    coupling = CouplingSerializer(required=False)
    initial = InitialSerializer(required=False)
    numerics = NumericsSerializer()
    outputs = OutputsSerializer(required=False)
    certification = CertificationSerializer(required=False)
    seed = serializers.IntegerField(min_value=0, default=0)

    optional_sections = ("kernels", "coupling", "initial", "outputs", "certification")

    def validate(self, attrs):
        for name in self.optional_sections:
            if name not in attrs:
                attrs[name] = self.fields[name].run_validation({})

        dim = attrs["domain"]["dim"]
        p = attrs["coupling"]["p"]
        if not admissible_p(dim, p):
            raise serializers.ValidationError(
                {"coupling": {"p": [exponent_bound_message(dim, p)]}}
            )

        mode_errors = {}
        for name, modes in attrs["initial"].items():
            bad = [i for i, mode in enumerate(modes) if len(mode["index"]) != dim]
            if bad:
                mode_errors[name] = [
                    f"mode {i} needs {dim} indices, one per axis" for i in bad
                ]
        if mode_errors:
            raise serializers.ValidationError({"initial": mode_errors})

        material = Material(**attrs["material"])
        kernels = _kernels(attrs["kernels"])
        try:
            check_admissible(kernels.g1, kernels.g2, material)
        except AdmissibilityError as exc:
            raise serializers.ValidationError({"kernels": [str(exc)]})
        return attrs

    def create(self, validated_data) -> ProblemSpec:
        domain = validated_data["domain"]
        grid = Grid(domain["dim"], tuple(domain["lengths"]), tuple(domain["n_cells"]))
        initial = validated_data["initial"]
        return ProblemSpec(
            domain=grid,
            material=Material(**validated_data["material"]),
            kernels=_kernels(validated_data["kernels"]),
            coupling=Coupling(n=grid.dim, **validated_data["coupling"]),
            initial=InitialData(
                **{
                    name: tuple(
                        Mode(tuple(mode["index"]), mode["amplitude"])
                        for mode in initial.get(name, ())
                    )
                    for name in ("u0_modes", "u1_modes", "v0_modes", "v1_modes")
                }
            ),
            numerics=NumericsConfig(**validated_data["numerics"]),
            outputs=OutputConfig(**validated_data["outputs"]),
            certification=CertificationConfig(**validated_data["certification"]),
            seed=validated_data["seed"],
        )

    def to_representation(self, instance: ProblemSpec):
        numerics = instance.numerics
        outputs = instance.outputs
        certification = instance.certification
        return {
            "domain": DomainSerializer().to_representation(instance.domain),
            "material": {
                "m0": instance.material.m0,
                "m1": instance.material.m1,
                "gamma": instance.material.gamma,
            },
            "kernels": KernelsSerializer().to_representation(instance.kernels),
            "coupling": CouplingSerializer().to_representation(instance.coupling),
            "initial": {
                name: [
                    ModeSerializer().to_representation(mode)
                    for mode in getattr(instance.initial, name)
                ]
                for name in ("u0_modes", "u1_modes", "v0_modes", "v1_modes")
            },
            "numerics": {
                "dt": numerics.dt,
                "t_end": numerics.t_end,
                "memory_mode": numerics.memory_mode,
                "linear_solver": numerics.linear_solver,
                "cg_tolerance": numerics.cg_tolerance,
                "cg_max_iterations": numerics.cg_max_iterations,
                "divergence_threshold": numerics.divergence_threshold,
                "cfl_safety": numerics.cfl_safety,
            },
            "outputs": {
                "series_path": outputs.series_path,
                "report_path": outputs.report_path,
                "stride": outputs.stride,
                "metrics_path": outputs.metrics_path,
            },
            "certification": {
                "enabled": certification.enabled,
                "eta_budget": certification.eta_budget,
                "eta_refinement_steps": certification.eta_refinement_steps,
                "eta_modes": certification.eta_modes,
                "eta_audit_samples": certification.eta_audit_samples,
            },
            "seed": instance.seed,
        }


def _kernels(data) -> KernelPair:
    return KernelPair(
        g1=PronyKernel.from_pairs((t["a"], t["b"]) for t in data.get("g1", ())),
        g2=PronyKernel.from_pairs((t["a"], t["b"]) for t in data.get("g2", ())),
    )

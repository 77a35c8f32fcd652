"""
Demo script for NCS Rate Bounds
"""
import sys


def run_demo(h: int = 1, D: float = 10.0, steps: int = 20_000) -> bool:
    """Bounds, ECDQ design and a short simulation on the benchmark plant"""
    print("📡 NCS Rate Bounds - Demo")
    print("=" * 50)

    try:
        from src.models.channel import DelaySpec
        from src.models.simulation import SimConfig
        from src.services.plant_service import min_stabilizing_rate, validate_assumption1
        from src.services.simulation_service import simulate_constant
        from src.services.synthesis_service import SynthesisService
        from src.services.verification_service import benchmark_plant

        plant = benchmark_plant()
        print("\nValidating plant...")
        report = validate_assumption1(plant)
        for check in report.checks:
            print(f"   {'✅' if check.passed else '❌'} {check.name} {check.detail}")
        print(f"   Minimum rate for stability: {min_stabilizing_rate(plant):.3f} bits/sample")

        service = SynthesisService()
        print("\n🔍 Performance floors")
        for delay in range(3):
            print(f"   d_inf(h={delay}) = {service.d_inf(plant, delay):.6f}")

        print(f"\n🔍 Bounds at h={h}, D={D}")
        bounds = service.compute_bounds(plant, h, D)
        print(f"   phi'(D)   = {bounds.phi_prime:.4f}")
        print(f"   lower     = {bounds.rate_lb_bits:.4f} bits/sample")
        print(f"   upper     = {bounds.rate_ub_bits:.4f} bits/sample")

        print("\n🚀 Simulating the ECDQ scheme...")
        scheme, delta = service.design_ecdq_scheme(plant, h, D)
        cfg = SimConfig(
            plant=plant,
            scheme=scheme,
            delta=delta,
            delays=DelaySpec.constant(h),
            horizon=steps,
            burn_in=steps // 10,
        )
        result = simulate_constant(cfg)
        print(f"   var(z)    = {result.var_z_hat:.4f} ± {result.ci_halfwidth:.4f} (target {D})")
        print(f"   rate      = {result.rate_bits:.4f} bits/sample")
        print(f"   entropy   = {result.entropy_bits:.4f} bits/sample")

        print("\n🎉 Demo completed successfully!")
        print("\nTo run the full experiment:")
        print("  python main.py bounds     # Rate bounds over (h, D)")
        print("  python main.py simulate   # ECDQ simulations")
        print("  python main.py verify     # Property checks")
        return True

    except Exception as e:
        print(f"❌ Demo failed: {e}")
        import traceback
        traceback.print_exc()
        return False


if __name__ == "__main__":
    success = run_demo()
    sys.exit(0 if success else 1)

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from grid.converter import required_pcc_phasor  # noqa: E402
from simulation.scenario import scr_to_params  # noqa: E402
from utils.oracles import steady_state_current  # noqa: E402
from utils.threephase import Phasor  # noqa: E402

# 额定工况：400 kV / 1000 MVA，SCR 3，X/R 5，指令 1 pu 同相
p = scr_to_params(3.0, 5.0, 400e3, 1000e6, 100.0 * math.pi)
i_base = 2.0 * 1000e6 / (3.0 * p.E)
i_ref = Phasor(i_base, 0.0)

v = required_pcc_phasor(i_ref, p)
current = steady_state_current(p, v)

print(f"R={p.R:.4f} Ω, L={p.L * 1e3:.4f} mH, E={p.E / 1e3:.4f} kV")
print(f"PCC 电压: {v.amplitude / 1e3:.4f} kV ∠ {v.phase:.6f} rad")
print(f"稳态电流: {current.amplitude:.4f} A ∠ {current.phase:.3e} rad")

error = abs(current.to_complex() - i_ref.to_complex()) / i_ref.amplitude
if error < 1e-9:
    print(f"✅ 相量往返一致，相对误差 {error:.2e}")
else:
    print(f"❌ 相量往返不一致，相对误差 {error:.2e}")
    sys.exit(1)

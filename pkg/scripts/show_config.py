import os
import sys
from pathlib import Path

from dotenv import load_dotenv

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from simulation.scenario import FIGURE_PRESETS, preset_path  # noqa: E402
from utils.errors import ConfigError  # noqa: E402

# 加载环境变量
load_dotenv('config/.env')

# 检查运行配置
for key in ("SIM_LOG_LEVEL", "SIM_LOG_FILE", "SIM_SCENARIO_DIR", "SIM_MAX_WORKERS", "SIM_PLOT_FORMAT"):
    value = os.getenv(key)
    print(f"{key}: {value if value else '(默认)'}")

# 检查预设场景文件
for figure, presets in FIGURE_PRESETS.items():
    for name in presets:
        try:
            print(f"✅ {figure}/{name}: {preset_path(name)}")
        except ConfigError as e:
            print(f"❌ {figure}/{name}: {e}")

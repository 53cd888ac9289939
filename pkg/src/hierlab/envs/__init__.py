from pathlib import Path

from hierlab.envs.base import EnvStepResult, GoalEnv, env_reset, env_step
from hierlab.envs.maze import PointMazeEnv, builtin_layout, load_layout, parse_layout
from hierlab.envs.reach import PointReach2D

TASKS = {
    "point_reach": "2-D kinematic reach, horizon 100, tolerance 0.05",
    "maze_wall": "point maze, single interior wall with a gap, horizon 500",
    "maze_s": "point maze, S-shaped corridor, horizon 500",
}


def make_env(task: str, **kw) -> GoalEnv:
    """Build a task by id; a path to a ``.txt`` layout gives a custom maze."""
    if task == "point_reach":
        return PointReach2D(**kw)
    if task == "maze_wall":
        return PointMazeEnv(builtin_layout("wall"), name=task, **kw)
    if task == "maze_s":
        return PointMazeEnv(builtin_layout("s"), name=task, **kw)
    if task.endswith(".txt"):
        return PointMazeEnv(load_layout(task), name=Path(task).stem, **kw)
    raise ValueError(f"unknown task {task!r}; known tasks: {sorted(TASKS)}")


__all__ = [
    "EnvStepResult", "GoalEnv", "PointMazeEnv", "PointReach2D", "TASKS", "builtin_layout",
    "env_reset", "env_step", "load_layout", "make_env", "parse_layout",
]

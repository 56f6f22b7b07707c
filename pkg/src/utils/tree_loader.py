"""Tree loader for serialized tree files"""
from pathlib import Path
from typing import List

from ..errors import MalformedTreeError, UsageError
from ..gp.tree import Tree, TreeSpace, parse_tree
from .logger import setup_logger

logger = setup_logger(__name__)


def load_tree_file(file_path, space: TreeSpace) -> List[Tree]:
    """
    Parse a tree file, one tree per line

    Expected file format:
    # comment
    (ADD x0 (MUL 0.5 x1))
    (VMEAN v0:9)

    Args:
        file_path: Path to the tree file
        space: Primitive set, input size and depth bound the trees must fit

    Returns:
        List of validated trees, in file order

    Raises:
        UsageError: if the file does not exist or holds no tree
        MalformedTreeError: naming the offending line
    """
    file = Path(file_path)
    if not file.exists():
        raise UsageError(f"Tree file not found: {file_path}")

    trees = []
    with open(file, 'r', encoding='utf-8') as f:
        for line_num, line in enumerate(f, 1):
            line = line.strip()

            # Skip empty lines and comments
            if not line or line.startswith('#'):
                continue

            try:
                trees.append(parse_tree(line, space))
            except MalformedTreeError as e:
                raise MalformedTreeError(f"{file_path}, line {line_num}: {e}") from e
            logger.debug(f"Parsed tree of {len(trees[-1])} node(s) from line {line_num}")

    if not trees:
        raise UsageError(f"No tree found in {file_path}")
    logger.info(f"Parsed {len(trees)} tree(s) from {file_path}")
    return trees


def write_tree_file(file_path, trees: List[Tree], header: str = "") -> Path:
    file = Path(file_path)
    with open(file, 'w', encoding='utf-8') as f:
        for line in header.splitlines():
            f.write(f"# {line}\n")
        for tree in trees:
            f.write(f"{tree}\n")
    return file

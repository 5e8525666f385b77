"""``python -m lrapomdp``."""

from .cli import main

main()

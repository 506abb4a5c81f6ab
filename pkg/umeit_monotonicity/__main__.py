# Allow `python -m umeit_monotonicity` to run the CLI.
from .cli import main

if __name__ == "__main__":
    main()

import sys

from swarm_inertia.cli import main

if __name__ == "__main__":
    sys.exit(main())

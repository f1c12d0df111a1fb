import sys

from dotenv import load_dotenv

if __name__ == "__main__":
    # Load settings overrides (STRATA_*) from a .env file.
    # See strata/config.py for the available variables.
    load_dotenv()

    from strata.cli import main

    sys.exit(main())

import sys

from vibracav.main import main

if __name__ == '__main__':
    sys.exit(main())

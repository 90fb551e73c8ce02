"""
Запуск CLI як модуля: python -m fcdkit
"""
import sys

from fcdkit.cli.main import main

if __name__ == "__main__":
    sys.exit(main())

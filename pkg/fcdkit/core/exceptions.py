"""Власні винятки для toolkit

Кожен виняток несе код завершення процесу для CLI:
2 - введення/виведення, 3 - валідація, 4 - чисельна помилка.
"""


class FcdKitException(Exception):
    """Базовий клас для всіх винятків"""
    exit_code: int = 1

    def __init__(self, detail: str, exit_code: int | None = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class DataFileException(FcdKitException):
    """Файл відсутній, не читається або має невірний формат"""
    exit_code = 2

    def __init__(self, detail: str = "Cannot read data file"):
        super().__init__(detail)


class ValidationException(FcdKitException, ValueError):
    """Невірні вхідні дані"""
    exit_code = 3

    def __init__(self, detail: str = "Invalid input"):
        super().__init__(detail)


class NumericalException(FcdKitException):
    """Чисельна помилка"""
    exit_code = 4

    def __init__(self, detail: str = "Numerical failure"):
        super().__init__(detail)


class DivergenceException(NumericalException):
    """Оптимізація розійшлася (NaN/inf або вибух цільової функції)"""

    def __init__(self, detail: str = "Optimization diverged"):
        super().__init__(detail)


class AmbiguityException(NumericalException):
    """Призначення найближчого сусіда неоднозначне"""

    def __init__(self, detail: str = "Nearest-neighbor assignment is ambiguous"):
        super().__init__(detail)


class ConstructionException(NumericalException):
    """Не вдалося побудувати конфігурацію"""

    def __init__(self, detail: str = "Construction failed"):
        super().__init__(detail)
